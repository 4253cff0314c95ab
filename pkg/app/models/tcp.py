"""
TCP endpoint state and the actions the sender state machine emits.
"""
from dataclasses import dataclass, field
from typing import Optional, Set

from app.constants import (
    CONGESTION_AVOIDANCE,
    CWND_FRACTION_BITS,
    CWND_ONE,
    SLOW_START,
    TCP_FLOW,
)
from app.models.packets import Segment


@dataclass(slots=True)
class TcpSenderState:
    """
    Reno sender. cwnd and ssthresh are fixed-point MSS counts with
    CWND_FRACTION_BITS fractional bits.
    """
    cwnd: int = CWND_ONE
    ssthresh: int = 64 * CWND_ONE
    dup_ack_count: int = 0
    phase: str = SLOW_START
    next_seq: int = 0
    highest_acked: int = 0
    rto_interval: int = 400_000
    rto_backoff: int = 1
    timer_deadline: Optional[int] = None

    mss: int = 1000
    receiver_window: int = 0  # 0 = unlimited
    transfer_segments: int = 0  # 0 = unlimited
    flow_id: str = TCP_FLOW

    transmissions: int = 0
    retransmissions: int = 0
    fast_retransmits: int = 0
    rto_count: int = 0
    acks_received: int = 0
    dup_acks_received: int = 0

    @classmethod
    def initial(cls, cwnd_mss: int = 1, ssthresh_mss: int = 64, **kwargs) -> 'TcpSenderState':
        """Fresh sender; starts in congestion avoidance when cwnd already reaches ssthresh."""
        cwnd = cwnd_mss * CWND_ONE
        ssthresh = ssthresh_mss * CWND_ONE
        phase = SLOW_START if cwnd < ssthresh else CONGESTION_AVOIDANCE
        return cls(cwnd=cwnd, ssthresh=ssthresh, phase=phase, **kwargs)

    @property
    def pending(self) -> int:
        return self.next_seq - self.highest_acked

    @property
    def cwnd_segments(self) -> int:
        return self.cwnd >> CWND_FRACTION_BITS

    @property
    def cwnd_mss(self) -> float:
        return self.cwnd / CWND_ONE

    @property
    def ssthresh_mss(self) -> float:
        return self.ssthresh / CWND_ONE

    @property
    def send_limit(self) -> int:
        limit = self.cwnd_segments
        if self.receiver_window:
            limit = min(limit, self.receiver_window)
        return limit

    @property
    def transfer_complete(self) -> bool:
        return bool(self.transfer_segments) and self.highest_acked >= self.transfer_segments


@dataclass(slots=True)
class TcpReceiverState:
    next_expected: int = 0
    out_of_order_buffer: Set[int] = field(default_factory=set)
    ack_size: int = 40
    flow_id: str = TCP_FLOW

    segments_received: int = 0
    duplicates_received: int = 0
    out_of_order_received: int = 0


@dataclass(frozen=True, slots=True)
class Transmit:
    segment: Segment
    retransmission: bool = False


@dataclass(frozen=True, slots=True)
class PhaseChange:
    old: str
    new: str
    reason: str
