"""
Stealth man-in-the-middle adversary on the gateway-to-gateway path.

The adversary never drops, delays or alters honest packets. It taps the
wire, remembers what it saw, and injects extra copies of observed ESP
packets, either at honest speed or over a faster path, under a (rho, sigma)
leaky-bucket budget.
"""
import logging
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Deque, List, Optional, Tuple, Union

from app.constants import (
    ACK_DUPLICATOR,
    ADVERSARY_STRATEGIES,
    DATA_DUPLICATOR,
    SPEEDUP_MULTI,
    SPEEDUP_SINGLE,
    STRATEGY_NONE,
    US_PER_SECOND,
)
from app.models.packets import EspPacket, Injection

logger = logging.getLogger(__name__)

OBSERVABILITY_TRANSPARENT = 'transparent'
OBSERVABILITY_OPAQUE = 'opaque'

SPEEDUP_STRATEGIES = (SPEEDUP_SINGLE, SPEEDUP_MULTI)
ACK_STRATEGIES = (ACK_DUPLICATOR,)


class AdversaryBudget:
    """
    (rho, sigma) leaky bucket: tokens refill at rho per second up to sigma.

    Token arithmetic is exact (Fraction) so that a bucket drained at t and
    asked again at t + sigma/rho is always full.
    """

    def __init__(self, rho: Union[Fraction, float, int], sigma: int, start: int = 0):
        if isinstance(rho, float):
            rho = Fraction(str(rho))
        self.rho = Fraction(rho)
        self.sigma = sigma
        self.tokens = Fraction(sigma)
        self.last_refill = start
        self.granted = 0
        self.denied = 0

    def _refill(self, now: int) -> None:
        elapsed = now - self.last_refill
        if elapsed > 0:
            self.tokens = min(Fraction(self.sigma), self.tokens + self.rho * elapsed / US_PER_SECOND)
            self.last_refill = now

    def admit(self, now: int, n: int) -> bool:
        """Grant and deduct n tokens if the bucket holds them."""
        if n < 1:
            raise ValueError("budget requests must be for at least one packet")
        self._refill(now)
        if self.tokens >= n:
            self.tokens -= n
            self.granted += n
            return True
        self.denied += 1
        return False


@dataclass(frozen=True, slots=True)
class Observation:
    packet: EspPacket
    observed_at: int
    toward: str


class StealthAdversary:
    """
    One adversary strategy plus its observation memory and epoch pacing.

    When an epoch is due, the first eligible observation opens a gather
    window; flush() at the window's end decides the strike over everything
    seen in it, so a burst of packets sharing an instant is seen whole.
    After a strike the next epoch is due `period` after the gather opened.

    A transparent adversary given a `victim_flow` opens gathers only on that
    flow's packets and copies only them; other traffic sharing the SA still
    counts towards the ESP sequence distance a speed-up targets.
    """

    def __init__(self, strategy: str, budget: AdversaryBudget, period: int,
                 remaining_delay: int, mss: int, window_width: int,
                 speedup: int = 0, copies: int = 3,
                 observability: str = OBSERVABILITY_TRANSPARENT, start: int = 0,
                 stale: bool = False, memory: int = 64, seed: int = 1,
                 slot: int = 1, victim_flow: Optional[str] = None):
        if strategy not in ADVERSARY_STRATEGIES or strategy == STRATEGY_NONE:
            raise ValueError(f"unknown adversary strategy '{strategy}'")
        if strategy in SPEEDUP_STRATEGIES and not 0 < speedup < remaining_delay:
            raise ValueError(
                f"speedup must satisfy 0 < speedup < {remaining_delay}us "
                f"(delay left after the tap)"
            )
        if period <= 0:
            raise ValueError("epoch period must be > 0")
        if slot <= 0:
            raise ValueError("slot must be > 0")

        self.strategy = strategy
        self.budget = budget
        self.period = period
        self.remaining_delay = remaining_delay
        self.mss = mss
        self.window_width = window_width
        self.speedup = speedup if strategy in SPEEDUP_STRATEGIES else 0
        self.copies = copies
        self.observability = observability
        self.stale = stale
        self.slot = slot
        self.victim_flow = victim_flow if observability == OBSERVABILITY_TRANSPARENT else None
        self.gather = self.speedup // 2
        self.next_epoch_due = start

        self._rng = random.Random(seed)
        self._memory: Deque[Observation] = deque(maxlen=memory)
        self._gathered: List[Observation] = []
        self._gather_opened: Optional[int] = None
        self._gather_deadline: Optional[int] = None
        self._follow_up_armed = False

        self.epoch_index = 0
        self.strikes = 0
        self.injections_total = 0
        self.epochs_skipped = 0
        self.gathers_without_target = 0

    @property
    def flush_at(self) -> Optional[int]:
        """Deadline of the open gather window, if any."""
        return self._gather_deadline

    @property
    def copies_per_strike(self) -> int:
        return 1 if self.strategy == SPEEDUP_SINGLE else self.copies

    def looks_like_ack(self, pkt: EspPacket) -> bool:
        if self.observability == OBSERVABILITY_OPAQUE:
            return pkt.wire_size < self.mss
        return pkt.inner.is_ack

    def _eligible(self, pkt: EspPacket) -> bool:
        is_ack = self.looks_like_ack(pkt)
        return is_ack if self.strategy in ACK_STRATEGIES else not is_ack

    def _is_victim(self, pkt: EspPacket) -> bool:
        return self.victim_flow is None or pkt.inner.flow_id == self.victim_flow

    def observe(self, pkt: EspPacket, toward: str, now: int) -> List[Injection]:
        """
        Take note of a packet crossing the tap.

        Returns injections only when a gather window expired without being
        flushed; normally the caller flushes at flush_at.
        """
        injections: List[Injection] = []
        if self._gather_deadline is not None and now > self._gather_deadline:
            injections = self.flush(now)

        observation = Observation(pkt, now, toward)
        if not self.looks_like_ack(pkt) and self._is_victim(pkt):
            self._memory.append(observation)
        if not self._eligible(pkt):
            return injections

        if self._gather_deadline is None:
            if not (self._follow_up_armed or now >= self.next_epoch_due):
                return injections
            if not self._is_victim(pkt):
                return injections
            self._gather_opened = now
            self._gather_deadline = now + self.gather
            self._gathered = []
        self._gathered.append(observation)
        return injections

    def flush(self, now: int) -> List[Injection]:
        """Close the gather window and strike if it holds a usable target."""
        gathered, opened = self._gathered, self._gather_opened
        self._gathered = []
        self._gather_opened = None
        self._gather_deadline = None
        follow_up = self._follow_up_armed
        self._follow_up_armed = False
        if not gathered:
            return []

        plan = self._plan(gathered, now)
        if not plan:
            self.gathers_without_target += 1
            return []

        if not self.budget.admit(now, len(plan)):
            self.epochs_skipped += 1
            if not follow_up:
                self.next_epoch_due = now + self.period
            logger.info(
                f"{self.strategy}: budget denied {len(plan)} packets at {now}us, "
                f"epoch skipped"
            )
            return []

        self.strikes += 1
        if not follow_up:
            self.epoch_index += 1
            self.next_epoch_due = opened + self.period
            if self.strategy == SPEEDUP_SINGLE:
                self._follow_up_armed = True

        injections = [
            Injection(
                packet=observation.packet,
                deliver_at=max(deliver_at, now),
                toward=observation.toward,
                strike_id=self.strikes,
                epoch_index=self.epoch_index,
                observed_at=observation.observed_at,
                follow_up=follow_up,
                copy_index=i,
            )
            for i, (observation, deliver_at) in enumerate(plan)
        ]
        self.injections_total += len(injections)
        logger.debug(
            f"{self.strategy}: strike {self.strikes} (epoch {self.epoch_index}"
            f"{', follow-up' if follow_up else ''}) at {now}us, "
            f"{len(injections)} copies of esp_seq "
            f"{sorted({i.packet.esp_seq for i in injections})}"
        )
        return injections

    def _plan(self, gathered: List[Observation], now: int) -> List[Tuple[Observation, int]]:
        honest = self.remaining_delay
        fast = self.remaining_delay - self.speedup
        first = gathered[0]
        same_sa = [o for o in gathered if o.packet.sa_id == first.packet.sa_id]
        victims = [o for o in same_sa if self._is_victim(o.packet)]

        if self.strategy == ACK_DUPLICATOR:
            last = victims[-1]
            return [(last, last.observed_at + honest)] * self.copies

        if self.strategy == DATA_DUPLICATOR:
            if self.stale and self._memory:
                old = self._rng.choice(list(self._memory))
                return [(old, now + honest)] * self.copies
            last = victims[-1]
            return [(last, last.observed_at + honest)] * self.copies

        if self.strategy == SPEEDUP_SINGLE:
            if self.window_width == 0:
                return []
            # a copy of first + W arriving early pushes `first` off the window
            target_seq = first.packet.esp_seq + self.window_width
            for observation in same_sa:
                if observation.packet.esp_seq == target_seq:
                    return [(observation, observation.observed_at + fast)]
            return []

        if len(victims) < self.copies + 1:
            return []
        # the lowest copy gets the full advantage, the rest land one slot
        # apart just ahead of the hole's honest arrival
        hole_arrival = first.observed_at + honest
        tail = victims[-self.copies:]
        plan = [(tail[0], tail[0].observed_at + fast)]
        for k, observation in enumerate(tail[1:], start=1):
            trailing = hole_arrival - (self.copies - k) * self.slot
            plan.append((observation, max(observation.observed_at + fast, trailing)))
        return plan
