"""
ESP-style tunnel between the two gateways.

Authentication is not simulated cryptographically: EspPacket is immutable
and only gateways construct it, so anything else on the path can at most
hand back a packet it has seen.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

from app.constants import ACCEPT, ESP_SEQ_MAX, REJECT_DUPLICATE, REJECT_LEFT
from app.models.packets import EspPacket, Segment
from app.services.simkernel import SimulationError

logger = logging.getLogger(__name__)

SA_SINGLE = 'single'
SA_PER_FLOW = 'per_flow'
SA_POLICIES = [SA_SINGLE, SA_PER_FLOW]


class TunnelError(SimulationError):
    """ESP sequence space exhausted or SA misuse."""


@dataclass
class AntiReplayWindow:
    """
    Receiver-side sliding window over ESP sequence numbers.

    Covers [right_edge - width + 1, right_edge]. Bit k of `seen` stands for
    sequence number right_edge - k. A width of 0 disables the check.
    """
    width: int
    right_edge: int = 0
    seen: int = 0
    accepted: int = 0
    rejected_left: int = 0
    rejected_duplicate: int = 0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("anti-replay window width must be >= 0")

    def check(self, esp_seq: int) -> str:
        """
        Decide on one arrival and update the window when it is accepted.

        Returns:
            str: ACCEPT, REJECT_LEFT or REJECT_DUPLICATE
        """
        if self.width == 0:
            self.accepted += 1
            self.right_edge = max(self.right_edge, esp_seq)
            return ACCEPT

        if esp_seq > self.right_edge:
            shift = esp_seq - self.right_edge
            if shift >= self.width:
                self.seen = 1
            else:
                self.seen = ((self.seen << shift) | 1) & ((1 << self.width) - 1)
            self.right_edge = esp_seq
            self.accepted += 1
            return ACCEPT

        offset = self.right_edge - esp_seq
        if offset >= self.width:
            self.rejected_left += 1
            return REJECT_LEFT

        bit = 1 << offset
        if self.seen & bit:
            self.rejected_duplicate += 1
            return REJECT_DUPLICATE
        self.seen |= bit
        self.accepted += 1
        return ACCEPT

    @property
    def left_edge(self) -> int:
        return max(0, self.right_edge - self.width + 1)


@dataclass
class SecurityAssociation:
    """Unidirectional SA: the sender's sequence counter plus the receiver's window."""
    sa_id: str
    window: AntiReplayWindow
    last_esp_seq: int = 0

    def encapsulate(self, seg: Segment, now: int) -> EspPacket:
        if self.last_esp_seq >= ESP_SEQ_MAX:
            raise TunnelError(f"SA {self.sa_id}: ESP sequence space exhausted")
        self.last_esp_seq += 1
        return EspPacket(self.last_esp_seq, seg, now, self.sa_id)


@dataclass
class SaTable:
    """
    Maps (direction, flow) onto security associations.

    In single mode every flow of a direction shares one SA, so their ESP
    sequence numbers interleave; per_flow mode gives each flow its own.
    """
    policy: str = SA_SINGLE
    window_width: int = 64
    _sas: Dict[Tuple[str, str], SecurityAssociation] = field(default_factory=dict)

    def __post_init__(self):
        if self.policy not in SA_POLICIES:
            raise ValueError(f"unknown sa_policy '{self.policy}'")

    def sa_for(self, direction: str, flow_id: str) -> SecurityAssociation:
        key = (direction, flow_id if self.policy == SA_PER_FLOW else '*')
        sa = self._sas.get(key)
        if sa is None:
            sa_id = f"{direction}:{key[1]}"
            sa = SecurityAssociation(sa_id, AntiReplayWindow(self.window_width))
            self._sas[key] = sa
            logger.debug(f"Created SA {sa_id} with window {self.window_width}")
        return sa

    def encapsulate(self, direction: str, seg: Segment, now: int) -> EspPacket:
        return self.sa_for(direction, seg.flow_id).encapsulate(seg, now)

    def check(self, direction: str, pkt: EspPacket) -> str:
        return self.sa_for(direction, pkt.inner.flow_id).window.check(pkt.esp_seq)
