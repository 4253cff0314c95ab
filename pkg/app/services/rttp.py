"""
Reordering tolerant tunneling at the receiving gateway.

The sending gateway timestamps every ESP packet; the receiving gateway
compares each data packet's one-way delay with its running estimate. A
packet that is markedly faster than usual and ahead of the expected
sequence number raises an alert, and the duplicate ACKs the protected
host then emits are held back. If the missing segment shows up the held
ACKs are discarded; if it does not show up within the typical delay they
are released in order, so genuine loss still reaches the sender.

Two modes:
    aggressive  hold the duplicate ACKs (default)
    trivial     hold the suspicious data packets themselves

Duplicate ACKs carrying data are never produced by the simulated
receiver, so there is no branch for them.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Set, Tuple, Union

from app.models.packets import EspPacket, Segment
from app.services.ipsec_tunnel import SaTable

logger = logging.getLogger(__name__)

RTTP_OFF = 'off'
RTTP_AGGRESSIVE = 'aggressive'
RTTP_TRIVIAL = 'trivial'
RTTP_MODES = [RTTP_OFF, RTTP_AGGRESSIVE, RTTP_TRIVIAL]


class DelayEstimator:
    """EWMA of the one-way tunnel delay; the first sample initialises it."""

    def __init__(self, alpha: Union[Fraction, float] = Fraction(1, 8)):
        if isinstance(alpha, float):
            alpha = Fraction(str(alpha))
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.alpha = Fraction(alpha)
        self._srtt: Optional[Fraction] = None
        self.samples = 0

    @property
    def ready(self) -> bool:
        return self._srtt is not None

    @property
    def srtt(self) -> int:
        return int(self._srtt) if self._srtt is not None else 0

    def update(self, sample: int) -> int:
        if sample <= 0:
            raise ValueError("delay samples must be > 0")
        if self._srtt is None:
            self._srtt = Fraction(sample)
        else:
            self._srtt = (1 - self.alpha) * self._srtt + self.alpha * sample
        self.samples += 1
        return self.srtt


@dataclass
class RttpCounters:
    suspicious_arrivals: int = 0
    holds: int = 0
    releases: int = 0
    discards: int = 0
    overflows: int = 0
    collisions: int = 0
    max_hold_delay: int = 0


@dataclass
class RttpGateway:
    """
    Per-flow RTTP state at the gateway in front of the receiving host.

    Handlers return what must leave the gateway now; the caller does the
    forwarding and keeps a timer event at `timer_deadline`.
    """
    mode: str = RTTP_AGGRESSIVE
    guard: float = 0.85
    capacity: int = 64
    estimator: DelayEstimator = field(default_factory=DelayEstimator)

    alert: bool = False
    pkt_sn: Optional[int] = None
    rcpt_time: Optional[int] = None
    ack_sn: Optional[int] = None
    dup_ack_count: int = 0
    held_acks: List[Tuple[Segment, int]] = field(default_factory=list)
    held_data: List[Tuple[EspPacket, int]] = field(default_factory=list)
    timer_deadline: Optional[int] = None
    expected_seq: int = 0
    forwarded_ahead: Set[int] = field(default_factory=set)
    counters: RttpCounters = field(default_factory=RttpCounters)

    def __post_init__(self):
        if self.mode not in (RTTP_AGGRESSIVE, RTTP_TRIVIAL):
            raise ValueError(f"unknown RTTP mode '{self.mode}'")
        if self.capacity < 1:
            raise ValueError("RTTP capacity must be >= 1")

    @property
    def typical_delay(self) -> int:
        return self.estimator.srtt

    @staticmethod
    def stamp_outgoing(sa_table: SaTable, direction: str, seg: Segment, now: int) -> EspPacket:
        """Sending-gateway side: the authenticated timestamp is the encapsulation time."""
        return sa_table.encapsulate(direction, seg, now)

    def _is_suspicious(self, delay: int, seq: int) -> bool:
        if not self.estimator.ready:
            return False
        return delay < self.guard * self.typical_delay and seq > self.expected_seq

    def _note_hold(self, since: int, now: int) -> None:
        self.counters.max_hold_delay = max(self.counters.max_hold_delay, now - since)

    def _advance_expected(self, seq: int) -> None:
        # expected_seq is the lowest segment not yet forwarded
        if seq > self.expected_seq:
            self.forwarded_ahead.add(seq)
            return
        if seq < self.expected_seq:
            return
        self.expected_seq += 1
        while self.expected_seq in self.forwarded_ahead:
            self.forwarded_ahead.remove(self.expected_seq)
            self.expected_seq += 1

    def _clear_alert(self) -> None:
        self.alert = False
        self.timer_deadline = None

    def on_incoming(self, pkt: EspPacket, now: int,
                    expected_inner_sn: Optional[int] = None) -> List[EspPacket]:
        """
        Data packet accepted by the anti-replay check on its way inward.

        The expected inner sequence number defaults to the lowest segment
        this gateway has not forwarded yet.

        Returns:
            Packets to forward to the protected host now, in order
        """
        if expected_inner_sn is not None:
            self.expected_seq = expected_inner_sn
            self.forwarded_ahead = {s for s in self.forwarded_ahead if s > expected_inner_sn}
        seq = pkt.inner.seq
        delay = now - pkt.stamped_at
        suspicious = self._is_suspicious(delay, seq)
        if not suspicious:
            self.estimator.update(delay)

        if self.mode == RTTP_AGGRESSIVE and self.held_acks and seq == self.ack_sn:
            for _, since in self.held_acks:
                self._note_hold(since, now)
            self.counters.discards += len(self.held_acks)
            logger.debug(
                f"RTTP: segment {seq} arrived at {now}us, "
                f"{len(self.held_acks)} held ACKs discarded"
            )
            self.held_acks = []
            self._clear_alert()
        elif suspicious:
            self.counters.suspicious_arrivals += 1
            if self.alert and (self.held_acks or self.held_data) and seq != self.pkt_sn:
                self.counters.collisions += 1
                logger.debug(f"RTTP: suspicious segment {seq} while tracking {self.pkt_sn}")
            self.pkt_sn = seq
            self.rcpt_time = now
            self.alert = True
            if self.mode == RTTP_TRIVIAL:
                return self._buffer_data(pkt, now)

        self._advance_expected(seq)
        if self.mode == RTTP_TRIVIAL and self.held_data:
            return [pkt] + self._release_contiguous(now)
        return [pkt]

    def _buffer_data(self, pkt: EspPacket, now: int) -> List[EspPacket]:
        if len(self.held_data) >= self.capacity:
            self.counters.overflows += 1
            logger.warning(f"RTTP: data buffer overflow at {now}us, failing open")
            released = self._release_data(now)
            self._advance_expected(pkt.inner.seq)
            return released + [pkt]
        self.held_data.append((pkt, now))
        self.counters.holds += 1
        if self.timer_deadline is None:
            self.timer_deadline = self.rcpt_time + self.typical_delay
        return []

    def _release_data(self, now: int) -> List[EspPacket]:
        held = sorted(self.held_data, key=lambda item: item[0].inner.seq)
        for pkt, since in held:
            self._note_hold(since, now)
            self._advance_expected(pkt.inner.seq)
        self.counters.releases += len(held)
        self.held_data = []
        self._clear_alert()
        return [pkt for pkt, _ in held]

    def _release_contiguous(self, now: int) -> List[EspPacket]:
        """Release buffered segments the gap in front of them has now closed for."""
        self.held_data.sort(key=lambda item: item[0].inner.seq)
        released: List[EspPacket] = []
        while self.held_data and self.held_data[0][0].inner.seq <= self.expected_seq:
            pkt, since = self.held_data.pop(0)
            self._note_hold(since, now)
            self._advance_expected(pkt.inner.seq)
            released.append(pkt)
        self.counters.releases += len(released)
        if not self.held_data:
            self._clear_alert()
        return released

    def _release_acks(self, now: int) -> List[Segment]:
        for _, since in self.held_acks:
            self._note_hold(since, now)
        released = [ack for ack, _ in self.held_acks]
        self.counters.releases += len(released)
        self.held_acks = []
        self._clear_alert()
        return released

    def on_outgoing_ack(self, ack: Segment, now: int) -> List[Segment]:
        """
        ACK from the protected host heading into the tunnel.

        Returns:
            ACKs to send now (empty when the ACK was quarantined)
        """
        if ack.ack_num != self.ack_sn:
            self.ack_sn = ack.ack_num
            self.dup_ack_count = 0
            return [ack]

        self.dup_ack_count += 1
        if self.mode != RTTP_AGGRESSIVE or not self.alert:
            return [ack]

        if len(self.held_acks) >= self.capacity:
            self.counters.overflows += 1
            logger.warning(
                f"RTTP: more than {self.capacity} duplicate ACKs held at {now}us, failing open"
            )
            return self._release_acks(now) + [ack]

        self.held_acks.append((ack, now))
        self.counters.holds += 1
        if self.timer_deadline is None:
            self.timer_deadline = max(now, self.rcpt_time + self.typical_delay)
        return []

    def on_timer(self, now: int) -> List[Union[Segment, EspPacket]]:
        """Deadline passed without the missing segment: release everything held, in order."""
        if self.mode == RTTP_TRIVIAL:
            if not self.held_data:
                self._clear_alert()
                return []
            logger.debug(f"RTTP: timer released {len(self.held_data)} buffered segments at {now}us")
            return self._release_data(now)

        if not self.held_acks:
            self._clear_alert()
            return []
        logger.debug(f"RTTP: timer released {len(self.held_acks)} duplicate ACKs at {now}us")
        return self._release_acks(now)
