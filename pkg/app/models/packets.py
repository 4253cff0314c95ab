"""
Wire-level records: TCP segments, ESP packets and adversary injections.

These are created per packet on the hot path, so they are slotted
dataclasses rather than pydantic models. EspPacket is frozen: once a
gateway has encapsulated a segment nobody can alter it, which is how the
tunnel's authentication is modelled.
"""
from dataclasses import dataclass, field
from typing import Literal, Optional

from app.constants import TCP_FLOW

SegmentKind = Literal['data', 'ack']


@dataclass(frozen=True, slots=True)
class Segment:
    """Transport unit. Sequence numbers count whole segments, not bytes."""
    kind: SegmentKind
    seq: Optional[int] = None
    ack_num: Optional[int] = None
    flow_id: str = TCP_FLOW
    sent_at: int = 0
    size: int = 0

    def __post_init__(self):
        if self.kind == 'data' and (self.seq is None or self.ack_num is not None):
            raise ValueError("data segments carry seq only")
        if self.kind == 'ack' and (self.ack_num is None or self.seq is not None):
            raise ValueError("acks carry ack_num only")

    @property
    def is_data(self) -> bool:
        return self.kind == 'data'

    @property
    def is_ack(self) -> bool:
        return self.kind == 'ack'

    @classmethod
    def data(cls, seq: int, sent_at: int, size: int, flow_id: str = TCP_FLOW) -> 'Segment':
        return cls('data', seq=seq, flow_id=flow_id, sent_at=sent_at, size=size)

    @classmethod
    def ack(cls, ack_num: int, sent_at: int, size: int, flow_id: str = TCP_FLOW) -> 'Segment':
        return cls('ack', ack_num=ack_num, flow_id=flow_id, sent_at=sent_at, size=size)


@dataclass(frozen=True, slots=True)
class EspPacket:
    """Tunnel encapsulation of one segment."""
    esp_seq: int
    inner: Segment
    stamped_at: int
    sa_id: str

    @property
    def wire_size(self) -> int:
        # the only inner attribute an opaque observer can see
        return self.inner.size


@dataclass(frozen=True, slots=True)
class Injection:
    """
    An extra delivery of a packet the adversary has already observed.

    The adversary can only reference EspPackets taken off the wire, so an
    injection is a copy by construction.
    """
    packet: EspPacket
    deliver_at: int
    toward: str
    strike_id: int = 0
    epoch_index: int = 0
    observed_at: int = 0
    follow_up: bool = False
    copy_index: int = field(default=0, compare=False)
