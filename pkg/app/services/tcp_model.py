"""
Reno sender and cumulative-ACK receiver state machines.

Slow start, congestion avoidance and fast recovery follow the classic
Reno FSM: three duplicate ACKs trigger fast retransmit, further duplicates
inflate the window, the first new-data ACK deflates it, and a timeout
drops back to slow start with exponential backoff.
"""
import logging
from typing import List, Union

from app.constants import (
    CONGESTION_AVOIDANCE,
    CWND_FRACTION_BITS,
    CWND_ONE,
    FAST_RECOVERY,
    RTO_BACKOFF_CAP,
    SLOW_START,
)
from app.models.packets import Segment
from app.models.tcp import PhaseChange, TcpReceiverState, TcpSenderState, Transmit
from app.services.simkernel import SimulationError

logger = logging.getLogger(__name__)

Action = Union[Transmit, PhaseChange]

DUP_ACK_THRESHOLD = 3
MIN_SSTHRESH = 2


class ProtocolError(SimulationError):
    """An endpoint received something the protocol says cannot happen."""


class TcpModelService:
    """State transitions for the TCP sender and receiver."""

    @staticmethod
    def _halved_ssthresh(state: TcpSenderState) -> int:
        return max(MIN_SSTHRESH, state.cwnd_segments // 2) << CWND_FRACTION_BITS

    @staticmethod
    def _clamp_to_receiver_window(state: TcpSenderState) -> None:
        if state.receiver_window:
            state.cwnd = min(state.cwnd, state.receiver_window * CWND_ONE)

    @staticmethod
    def _change_phase(state: TcpSenderState, new: str, reason: str, actions: List[Action]) -> None:
        if state.phase != new:
            actions.append(PhaseChange(state.phase, new, reason))
            state.phase = new

    @staticmethod
    def _retransmit(state: TcpSenderState, now: int) -> Transmit:
        state.transmissions += 1
        state.retransmissions += 1
        segment = Segment.data(state.highest_acked, now, state.mss, state.flow_id)
        return Transmit(segment, retransmission=True)

    @staticmethod
    def sender_on_ack(state: TcpSenderState, ack: Segment, now: int) -> List[Action]:
        """
        Process one ACK arriving at the sender.

        Args:
            state: Sender state, updated in place
            ack: The arriving ACK segment
            now: Current virtual time (us)

        Returns:
            List of actions: retransmissions, new transmissions and phase changes

        Raises:
            ProtocolError: if the segment is not an ACK or acknowledges unsent data
        """
        if not ack.is_ack:
            raise ProtocolError(f"sender got a {ack.kind} segment")
        if ack.ack_num > state.next_seq:
            raise ProtocolError(
                f"ACK {ack.ack_num} acknowledges data never sent (next_seq={state.next_seq})"
            )

        actions: List[Action] = []
        state.acks_received += 1

        if ack.ack_num < state.highest_acked:
            return actions

        if ack.ack_num == state.highest_acked:
            if state.pending == 0:
                return actions
            state.dup_acks_received += 1
            state.dup_ack_count += 1
            if state.phase == FAST_RECOVERY:
                state.cwnd += CWND_ONE
            elif state.dup_ack_count == DUP_ACK_THRESHOLD:
                state.ssthresh = TcpModelService._halved_ssthresh(state)
                state.cwnd = state.ssthresh + DUP_ACK_THRESHOLD * CWND_ONE
                TcpModelService._change_phase(state, FAST_RECOVERY, 'fast_retransmit', actions)
                actions.append(TcpModelService._retransmit(state, now))
                state.fast_retransmits += 1
                logger.debug(
                    f"Fast retransmit of {state.highest_acked} at {now}us, "
                    f"ssthresh={state.ssthresh_mss:g}"
                )
            actions.extend(TcpModelService.sender_try_send(state, now))
            return actions

        state.highest_acked = ack.ack_num
        state.dup_ack_count = 0
        state.rto_backoff = 1

        if state.phase == FAST_RECOVERY:
            state.cwnd = state.ssthresh
            TcpModelService._change_phase(state, CONGESTION_AVOIDANCE, 'deflate', actions)
        elif state.phase == SLOW_START:
            state.cwnd += CWND_ONE
            TcpModelService._clamp_to_receiver_window(state)
            if state.cwnd >= state.ssthresh:
                TcpModelService._change_phase(state, CONGESTION_AVOIDANCE, 'ssthresh', actions)
        else:
            state.cwnd += max(1, (CWND_ONE * CWND_ONE) // state.cwnd)
            TcpModelService._clamp_to_receiver_window(state)

        state.timer_deadline = now + state.rto_interval if state.pending > 0 else None
        actions.extend(TcpModelService.sender_try_send(state, now))
        return actions

    @staticmethod
    def sender_on_rto(state: TcpSenderState, now: int) -> List[Action]:
        """Retransmission timeout: back to one segment in slow start and back off the timer."""
        if state.pending == 0:
            state.timer_deadline = None
            return []

        actions: List[Action] = []
        state.ssthresh = TcpModelService._halved_ssthresh(state)
        state.cwnd = CWND_ONE
        state.dup_ack_count = 0
        TcpModelService._change_phase(state, SLOW_START, 'rto', actions)
        state.rto_backoff = min(state.rto_backoff * 2, RTO_BACKOFF_CAP)
        state.rto_count += 1
        actions.append(TcpModelService._retransmit(state, now))
        state.timer_deadline = now + state.rto_interval * state.rto_backoff
        logger.info(
            f"RTO at {now}us for segment {state.highest_acked}, "
            f"backoff x{state.rto_backoff}"
        )
        return actions

    @staticmethod
    def sender_try_send(state: TcpSenderState, now: int) -> List[Transmit]:
        """Send new segments while the window allows it."""
        sent: List[Transmit] = []
        limit = state.send_limit
        while state.pending < limit:
            if state.transfer_segments and state.next_seq >= state.transfer_segments:
                break
            sent.append(Transmit(Segment.data(state.next_seq, now, state.mss, state.flow_id)))
            state.next_seq += 1
            state.transmissions += 1
        if sent and state.timer_deadline is None:
            state.timer_deadline = now + state.rto_interval * state.rto_backoff
        return sent

    @staticmethod
    def receiver_on_segment(state: TcpReceiverState, seg: Segment, now: int) -> Segment:
        """Accept a data segment and return the cumulative ACK for it."""
        if not seg.is_data:
            raise ProtocolError(f"receiver got a {seg.kind} segment")

        state.segments_received += 1
        if seg.seq == state.next_expected:
            state.next_expected += 1
            while state.next_expected in state.out_of_order_buffer:
                state.out_of_order_buffer.remove(state.next_expected)
                state.next_expected += 1
        elif seg.seq > state.next_expected and seg.seq not in state.out_of_order_buffer:
            state.out_of_order_buffer.add(seg.seq)
            state.out_of_order_received += 1
        else:
            state.duplicates_received += 1

        return Segment.ack(state.next_expected, now, state.ack_size, state.flow_id)
