"""
End-to-end run of one scenario.

Wires the TCP endpoints, the two tunnel gateways, the adversary tap and
RTTP onto the event queue, runs to the scenario's end and collects
RunMetrics.

    server --LAN-- gw2 ==WAN== gw1 --LAN-- client
                         ^
                     adversary tap
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

from app.config import Config
from app.constants import (
    ACCEPT,
    ADVERSARY,
    BOTH_DIRECTIONS,
    CLIENT,
    CLIENT_TO_SERVER,
    CROSS_FLOW,
    CWND_ONE,
    EVENT_ACK,
    EVENT_ATTACK,
    EVENT_DUPACK,
    EVENT_FAST_RETRANSMIT,
    EVENT_PHASE,
    EVENT_RTO,
    FAST_RECOVERY,
    GW_CLIENT_SIDE,
    GW_SERVER_SIDE,
    SERVER,
    SERVER_TO_CLIENT,
    TCP_FLOW,
    TRACE_FULL,
    TRACE_LEVELS,
    TRACE_OFF,
    US_PER_SECOND,
)
from app.models.metrics import EpochSample, RunMetrics, TraceRow
from app.models.packets import EspPacket, Injection, Segment
from app.models.scenario import ScenarioConfig
from app.models.tcp import PhaseChange, TcpReceiverState, TcpSenderState, Transmit
from app.services.adversary import AdversaryBudget, StealthAdversary
from app.services.audit_service import AuditService, RunAuditLog
from app.services.ipsec_tunnel import SaTable
from app.services.rttp import RTTP_OFF, DelayEstimator, RttpGateway
from app.services.simkernel import Event, EventQueue, Link
from app.services.tcp_model import TcpModelService

logger = logging.getLogger(__name__)


class RtoTimer:
    __slots__ = ()


class RttpTimer:
    __slots__ = ()


class CrossTrafficTick:
    __slots__ = ()


class AdversaryFlush:
    __slots__ = ()


RTO_TIMER = RtoTimer()
RTTP_TIMER = RttpTimer()
ADVERSARY_FLUSH = AdversaryFlush()
CROSS_TICK = CrossTrafficTick()


@dataclass(frozen=True, slots=True)
class Observed:
    packet: EspPacket
    toward: str


class TunnelSimulation:
    """One configured run. Build it, call run(), read the metrics."""

    def __init__(self, cfg: ScenarioConfig, trace_level: Optional[str] = None):
        self.cfg = cfg
        self.trace_level = (trace_level or Config.TRACE_LEVEL).lower()
        if self.trace_level not in TRACE_LEVELS:
            raise ValueError(f"unknown trace level '{self.trace_level}'")

        self.queue = EventQueue()
        self.audit = RunAuditLog(cfg.name)
        self.sender = TcpSenderState.initial(
            cfg.tcp_initial_cwnd,
            cfg.tcp_initial_ssthresh,
            rto_interval=cfg.rto,
            mss=cfg.mss,
            receiver_window=cfg.tcp_receiver_window,
            transfer_segments=cfg.transfer_segments,
        )
        self.receiver = TcpReceiverState(ack_size=cfg.ack_size)
        self.sa_table = SaTable(cfg.sa_policy, cfg.anti_replay_window)
        self.links = self._build_links(cfg)
        self.adversary = self._build_adversary(cfg)
        self.rttp = self._build_rttp(cfg)

        self.queue.register(SERVER, self._on_server)
        self.queue.register(GW_SERVER_SIDE, self._on_server_gateway)
        self.queue.register(GW_CLIENT_SIDE, self._on_client_gateway)
        self.queue.register(CLIENT, self._on_client)
        self.queue.register(ADVERSARY, self._on_adversary)

        self._rto_event: Optional[Event] = None
        self._rto_at: Optional[int] = None
        self._rttp_event: Optional[Event] = None
        self._rttp_at: Optional[int] = None
        self._flush_at: Optional[int] = None
        self._scripted = set(cfg.scripted_drops)
        self._taps = self._tapped_directions(cfg)

        self.trace: List[TraceRow] = []
        self.drops: Counter = Counter()
        self.fast_retransmit_times: List[int] = []
        self.rto_times: List[int] = []
        self.epoch_samples: List[EpochSample] = []
        self._sampled_strikes = set()
        self.honest_data_accepted = 0
        self.honest_data_dropped = 0
        self.scripted_drops_applied = 0
        self.injections_accepted = 0
        self.injections_rejected = 0
        self.cross_sent = 0
        self.cross_delivered = 0
        self.cross_dropped = 0
        self._cross_interval = (
            round(US_PER_SECOND / cfg.cross_traffic_rate) if cfg.cross_traffic_rate > 0 else None
        )
        self.max_cwnd = self.sender.cwnd
        self.completed_at: Optional[int] = None
        self._area = 0
        self._area_at = 0

    @staticmethod
    def _build_links(cfg: ScenarioConfig) -> Dict[Tuple[str, str], Link]:
        hops = [
            (SERVER, GW_SERVER_SIDE, cfg.lan_delay),
            (GW_SERVER_SIDE, GW_CLIENT_SIDE, cfg.wan_delay),
            (GW_CLIENT_SIDE, CLIENT, cfg.lan_delay),
        ]
        links = {}
        for a, b, delay in hops:
            links[(a, b)] = Link(delay, cfg.rate, a, b)
            links[(b, a)] = Link(delay, cfg.rate, b, a)
        return links

    @staticmethod
    def _build_adversary(cfg: ScenarioConfig) -> Optional[StealthAdversary]:
        if not cfg.under_attack:
            return None
        budget = AdversaryBudget(cfg.rho, cfg.adversary_sigma)
        return StealthAdversary(
            strategy=cfg.adversary,
            budget=budget,
            period=cfg.period,
            remaining_delay=cfg.remaining_delay,
            mss=cfg.mss,
            window_width=cfg.anti_replay_window,
            speedup=cfg.speedup,
            copies=cfg.adversary_copies,
            observability=cfg.adversary_observability,
            start=cfg.adversary_start,
            stale=cfg.adversary_stale,
            memory=cfg.adversary_memory,
            seed=cfg.seed,
            slot=-(-cfg.mss * US_PER_SECOND // cfg.rate),
            victim_flow=TCP_FLOW,
        )

    @staticmethod
    def _build_rttp(cfg: ScenarioConfig) -> Optional[RttpGateway]:
        if cfg.rttp == RTTP_OFF:
            return None
        return RttpGateway(
            mode=cfg.rttp,
            guard=cfg.rttp_guard,
            capacity=cfg.rttp_capacity,
            estimator=DelayEstimator(cfg.rttp_alpha),
        )

    @staticmethod
    def _tapped_directions(cfg: ScenarioConfig) -> set:
        if not cfg.under_attack:
            return set()
        if cfg.direction == BOTH_DIRECTIONS:
            return {CLIENT_TO_SERVER, SERVER_TO_CLIENT}
        return {cfg.direction}

    # bookkeeping

    def _accumulate(self, now: int) -> None:
        self._area += self.sender.cwnd * (now - self._area_at)
        self._area_at = now

    def _record(self, now: int, event: str) -> None:
        if self.trace_level != TRACE_OFF:
            self.trace.append(TraceRow(now, self.sender.cwnd, self.sender.phase, event))

    def _effective_cwnd(self) -> float:
        # window the sender returns to once fast recovery deflates
        if self.sender.phase == FAST_RECOVERY:
            return self.sender.ssthresh_mss
        return self.sender.cwnd_mss

    # server (TCP sender)

    def _on_server(self, payload: Union[Segment, RtoTimer], now: int) -> None:
        self._accumulate(now)
        if isinstance(payload, RtoTimer):
            if self.sender.timer_deadline != now:
                return
            actions = TcpModelService.sender_on_rto(self.sender, now)
        else:
            before = self.sender.highest_acked
            pending = self.sender.pending
            actions = TcpModelService.sender_on_ack(self.sender, payload, now)
            if self.trace_level == TRACE_FULL:
                duplicate = payload.ack_num == before and pending > 0
                self._record(now, EVENT_DUPACK if duplicate else EVENT_ACK)
            if self.completed_at is None and self.sender.transfer_complete:
                self.completed_at = now
        self._apply(actions, now)

    def _apply(self, actions: List[Union[Transmit, PhaseChange]], now: int) -> None:
        for action in actions:
            if isinstance(action, Transmit):
                seg = action.segment
                self.links[(SERVER, GW_SERVER_SIDE)].deliver(self.queue, seg, seg.size, now)
            elif action.reason == 'fast_retransmit':
                self.fast_retransmit_times.append(now)
                self._record(now, EVENT_FAST_RETRANSMIT)
            elif action.reason == 'rto':
                self.rto_times.append(now)
                self._record(now, EVENT_RTO)
            else:
                self._record(now, EVENT_PHASE)
        self.max_cwnd = max(self.max_cwnd, self.sender.cwnd)
        self._sync_rto_timer()

    def _sync_rto_timer(self) -> None:
        deadline = self.sender.timer_deadline
        if deadline == self._rto_at:
            return
        self.queue.cancel(self._rto_event)
        self._rto_event = None
        if deadline is not None:
            self._rto_event = self.queue.schedule(deadline, SERVER, RTO_TIMER)
        self._rto_at = deadline

    # gateways

    def _send_wan(self, src: str, dst: str, pkt: EspPacket, now: int, direction: str) -> None:
        link = self.links[(src, dst)]
        arrival = link.deliver(self.queue, pkt, pkt.wire_size, now)
        if direction in self._taps:
            observed_at = arrival - link.propagation_delay + self.cfg.tap_delay
            self.queue.schedule(observed_at, ADVERSARY, Observed(pkt, dst))

    def _send_cross_traffic(self, now: int) -> None:
        """One constant-rate cross-traffic packet from gw2, then the next tick."""
        seg = Segment.data(self.cross_sent, now, self.cfg.mss, flow_id=CROSS_FLOW)
        self.cross_sent += 1
        pkt = RttpGateway.stamp_outgoing(self.sa_table, SERVER_TO_CLIENT, seg, now)
        self._send_wan(GW_SERVER_SIDE, GW_CLIENT_SIDE, pkt, now, SERVER_TO_CLIENT)
        if now + self._cross_interval < self.cfg.duration:
            self.queue.schedule(now + self._cross_interval, GW_SERVER_SIDE, CROSS_TICK)

    def _check_replay(self, direction: str, payload: Union[EspPacket, Injection],
                      now: int) -> Tuple[EspPacket, bool]:
        """Anti-replay check on a WAN arrival; returns the packet and whether it passed."""
        injection = payload if isinstance(payload, Injection) else None
        pkt = injection.packet if injection else payload
        if injection and injection.strike_id not in self._sampled_strikes:
            self._sample_epoch(injection, now)

        verdict = self.sa_table.check(direction, pkt)
        if injection:
            if verdict == ACCEPT:
                self.injections_accepted += 1
            else:
                self.injections_rejected += 1
                self.drops[f"injected_{verdict}"] += 1
            return pkt, verdict == ACCEPT

        if pkt.inner.flow_id == CROSS_FLOW:
            if verdict == ACCEPT:
                self.cross_delivered += 1
            else:
                self.cross_dropped += 1
                self.drops[f"cross_{verdict}"] += 1
            return pkt, verdict == ACCEPT

        if verdict == ACCEPT:
            if pkt.inner.is_data:
                self.honest_data_accepted += 1
            return pkt, True
        self.drops[f"legit_{verdict}"] += 1
        if pkt.inner.is_data:
            self.honest_data_dropped += 1
        self.audit.log_event(
            'ANTIREPLAY_DROP', now, sa_id=pkt.sa_id, esp_seq=pkt.esp_seq,
            reason=verdict, kind=pkt.inner.kind,
        )
        return pkt, False

    def _sample_epoch(self, injection: Injection, now: int) -> None:
        self._sampled_strikes.add(injection.strike_id)
        self._accumulate(now)
        self.epoch_samples.append(EpochSample(
            index=len(self.epoch_samples),
            strike_id=injection.strike_id,
            time_us=now,
            cwnd=self._effective_cwnd(),
            phase=self.sender.phase,
            segments_acked=self.sender.highest_acked,
            cwnd_area=self._area / (CWND_ONE * US_PER_SECOND),
        ))
        self._record(now, EVENT_ATTACK)

    def _on_server_gateway(self, payload, now: int) -> None:
        if isinstance(payload, CrossTrafficTick):
            self._send_cross_traffic(now)
            return
        if isinstance(payload, Segment):
            if payload.is_data and payload.seq in self._scripted:
                self._scripted.discard(payload.seq)
                self.scripted_drops_applied += 1
                self.honest_data_dropped += 1
                self.audit.log_event('SCRIPTED_DROP', now, seq=payload.seq)
                logger.debug(f"Scripted drop of segment {payload.seq} at {now}us")
                return
            pkt = RttpGateway.stamp_outgoing(self.sa_table, SERVER_TO_CLIENT, payload, now)
            self._send_wan(GW_SERVER_SIDE, GW_CLIENT_SIDE, pkt, now, SERVER_TO_CLIENT)
            return

        pkt, accepted = self._check_replay(CLIENT_TO_SERVER, payload, now)
        if accepted and pkt.inner.flow_id != CROSS_FLOW:
            inner = pkt.inner
            self.links[(GW_SERVER_SIDE, SERVER)].deliver(self.queue, inner, inner.size, now)

    def _on_client_gateway(self, payload, now: int) -> None:
        if isinstance(payload, Segment):
            outgoing = [payload] if self.rttp is None else self._rttp_outgoing(payload, now)
            for ack in outgoing:
                self._tunnel_ack(ack, now)
            return

        if isinstance(payload, RttpTimer):
            if self.rttp is not None and self._rttp_at == now:
                released = self.rttp.on_timer(now)
                self._sync_rttp_timer()
                for item in released:
                    if isinstance(item, EspPacket):
                        self._to_client(item, now)
                    else:
                        self._tunnel_ack(item, now)
            return

        pkt, accepted = self._check_replay(SERVER_TO_CLIENT, payload, now)
        # cross traffic terminates at the gateway
        if not accepted or pkt.inner.flow_id == CROSS_FLOW:
            return
        if self.rttp is None or not pkt.inner.is_data:
            self._to_client(pkt, now)
            return
        forward = self.rttp.on_incoming(pkt, now)
        self._sync_rttp_timer()
        for item in forward:
            self._to_client(item, now)

    def _rttp_outgoing(self, ack: Segment, now: int) -> List[Segment]:
        overflows = self.rttp.counters.overflows
        outgoing = self.rttp.on_outgoing_ack(ack, now)
        if self.rttp.counters.overflows != overflows:
            self.audit.log_event('RTTP_OVERFLOW', now, released=len(outgoing))
        self._sync_rttp_timer()
        return outgoing

    def _sync_rttp_timer(self) -> None:
        deadline = self.rttp.timer_deadline
        if deadline == self._rttp_at:
            return
        self.queue.cancel(self._rttp_event)
        self._rttp_event = None
        if deadline is not None:
            self._rttp_event = self.queue.schedule(deadline, GW_CLIENT_SIDE, RTTP_TIMER)
        self._rttp_at = deadline

    def _tunnel_ack(self, ack: Segment, now: int) -> None:
        pkt = RttpGateway.stamp_outgoing(self.sa_table, CLIENT_TO_SERVER, ack, now)
        self._send_wan(GW_CLIENT_SIDE, GW_SERVER_SIDE, pkt, now, CLIENT_TO_SERVER)

    def _to_client(self, pkt: EspPacket, now: int) -> None:
        inner = pkt.inner
        self.links[(GW_CLIENT_SIDE, CLIENT)].deliver(self.queue, inner, inner.size, now)

    # client (TCP receiver)

    def _on_client(self, seg: Segment, now: int) -> None:
        ack = TcpModelService.receiver_on_segment(self.receiver, seg, now)
        self.links[(CLIENT, GW_CLIENT_SIDE)].deliver(self.queue, ack, ack.size, now)

    # adversary

    def _on_adversary(self, payload: Union[Observed, AdversaryFlush], now: int) -> None:
        if isinstance(payload, Observed):
            pkt = payload.packet
            self.audit.note_observed(pkt.sa_id, pkt.esp_seq)
            self._launch(self.adversary.observe(pkt, payload.toward, now), now)
            flush_at = self.adversary.flush_at
            if flush_at is not None and flush_at != self._flush_at:
                self.queue.schedule(flush_at, ADVERSARY, ADVERSARY_FLUSH)
                self._flush_at = flush_at
            return

        flush_at = self.adversary.flush_at
        if flush_at is None or flush_at > now:
            return
        self._flush_at = None
        skipped = self.adversary.epochs_skipped
        self._launch(self.adversary.flush(now), now)
        if self.adversary.epochs_skipped != skipped:
            self.audit.log_event('EPOCH_SKIPPED', now, strategy=self.adversary.strategy)

    def _launch(self, injections: List[Injection], now: int) -> None:
        if not injections:
            return
        self.audit.log_event(
            'STRIKE', now,
            strike_id=injections[0].strike_id,
            epoch_index=injections[0].epoch_index,
            copies=len(injections),
        )
        for injection in injections:
            self.audit.record_injection(injection, now)
            self.queue.schedule(injection.deliver_at, injection.toward, injection)

    # run

    def run(self) -> RunMetrics:
        cfg = self.cfg
        self.audit.log_event('RUN_STARTED', 0, strategy=cfg.adversary, rttp=cfg.rttp)
        self._apply(TcpModelService.sender_try_send(self.sender, 0), 0)
        if self._cross_interval is not None:
            self.queue.schedule(self._cross_interval // 2, GW_SERVER_SIDE, CROSS_TICK)
        self.queue.run_until(cfg.duration)
        self._accumulate(cfg.duration)
        metrics = self._collect()
        self.audit.log_event(
            'RUN_FINISHED', cfg.duration,
            throughput_Bps=metrics.throughput_Bps,
            fast_retransmits=metrics.fast_retransmits,
            rto_count=metrics.rto_count,
        )
        return metrics

    def _honest_data_in_flight(self, event: Event) -> bool:
        payload = event.payload
        if isinstance(payload, Segment):
            return payload.is_data and event.target == GW_SERVER_SIDE
        return (
            isinstance(payload, EspPacket)
            and payload.inner.is_data
            and payload.inner.flow_id == TCP_FLOW
        )

    def _collect(self) -> RunMetrics:
        cfg, sender = self.cfg, self.sender
        elapsed = self.completed_at or cfg.duration
        in_flight = self.queue.pending(self._honest_data_in_flight)
        injections_in_flight = self.queue.pending(lambda e: isinstance(e.payload, Injection))

        conserved = (
            sender.transmissions
            == self.honest_data_accepted + self.honest_data_dropped + in_flight
            and sender.highest_acked <= sender.next_seq
        )
        if not conserved:
            logger.error(
                f"{cfg.name}: conservation violated: {sender.transmissions} sent vs "
                f"{self.honest_data_accepted} delivered + {self.honest_data_dropped} dropped "
                f"+ {in_flight} in flight"
            )

        injections_total = self.adversary.injections_total if self.adversary else 0
        if injections_total != self.injections_accepted + self.injections_rejected + injections_in_flight:
            logger.error(f"{cfg.name}: injection accounting mismatch")

        budget_sound = True
        if self.adversary is not None:
            budget_sound = AuditService.check_budget_soundness(
                self.audit.injection_times, cfg.rho, cfg.adversary_sigma
            )

        rttp = self.rttp.counters if self.rttp else None
        return RunMetrics(
            scenario=cfg.name,
            seed=cfg.seed,
            strategy=cfg.adversary,
            rttp=cfg.rttp,
            anti_replay_window=cfg.anti_replay_window,
            sa_policy=cfg.sa_policy,
            duration_us=cfg.duration,
            elapsed_us=elapsed,
            events_dispatched=self.queue.dispatched_total,
            transmissions=sender.transmissions,
            retransmissions=sender.retransmissions,
            segments_sent=sender.next_seq,
            segments_acked=sender.highest_acked,
            bytes_sent=sender.next_seq * cfg.mss,
            bytes_acked=sender.highest_acked * cfg.mss,
            throughput_Bps=sender.highest_acked * cfg.mss * US_PER_SECOND / elapsed,
            fast_retransmits=sender.fast_retransmits,
            rto_count=sender.rto_count,
            rto_times=self.rto_times,
            fast_retransmit_times=self.fast_retransmit_times,
            avg_cwnd=self._area / (CWND_ONE * cfg.duration),
            max_cwnd=self.max_cwnd / CWND_ONE,
            final_cwnd=sender.cwnd_mss,
            antireplay_drops=dict(sorted(self.drops.items())),
            legit_drops=sum(v for k, v in self.drops.items() if k.startswith('legit_')),
            scripted_drops_applied=self.scripted_drops_applied,
            in_flight_data=in_flight,
            conservation_ok=conserved,
            cross_traffic_sent=self.cross_sent,
            cross_traffic_delivered=self.cross_delivered,
            cross_traffic_dropped=self.cross_dropped,
            strikes=self.adversary.strikes if self.adversary else 0,
            epochs_skipped=self.adversary.epochs_skipped if self.adversary else 0,
            injections_total=injections_total,
            injections_accepted=self.injections_accepted,
            injections_rejected=self.injections_rejected,
            injections_in_flight=injections_in_flight,
            budget_sound=budget_sound,
            provenance_ok=self.audit.provenance_ok,
            rttp_suspicious=rttp.suspicious_arrivals if rttp else 0,
            rttp_holds=rttp.holds if rttp else 0,
            rttp_releases=rttp.releases if rttp else 0,
            rttp_discards=rttp.discards if rttp else 0,
            rttp_overflows=rttp.overflows if rttp else 0,
            rttp_collisions=rttp.collisions if rttp else 0,
            rttp_max_hold_delay_us=rttp.max_hold_delay if rttp else 0,
            rttp_typical_delay_us=self.rttp.typical_delay if self.rttp else 0,
            epoch_samples=self.epoch_samples,
            trace=self.trace,
        )


class SimulationService:
    """Service entry points for running scenarios."""

    @staticmethod
    def run_scenario(cfg: ScenarioConfig, trace_level: Optional[str] = None,
                     audit_path: Optional[str] = None) -> RunMetrics:
        """
        Run one scenario to completion.

        Args:
            cfg: Validated scenario
            trace_level: off | summary | full; defaults to Config.TRACE_LEVEL
            audit_path: where to write the run's audit trail as json, if anywhere

        Returns:
            RunMetrics: deterministic for a given (cfg, seed)

        Raises:
            SimulationError: on any fatal condition inside the run, with the
                dispatched event attached
            ValueError: on an unknown trace level
        """
        logger.info(
            f"Running scenario '{cfg.name}' ({cfg.adversary}, W={cfg.anti_replay_window}, "
            f"rttp={cfg.rttp}) for {cfg.duration / US_PER_SECOND:g}s virtual"
        )
        simulation = TunnelSimulation(cfg, trace_level)
        metrics = simulation.run()
        if audit_path:
            simulation.audit.save(audit_path)
        logger.info(
            f"Finished '{cfg.name}': {metrics.throughput_Bps:.0f} B/s, "
            f"{metrics.fast_retransmits} fast retransmits, {metrics.rto_count} RTOs, "
            f"{metrics.legit_drops} legit drops, {metrics.events_dispatched} events"
        )
        return metrics
