"""
Deterministic virtual-time event engine and constant-delay links.

Events are kept in a heapq min-heap keyed on (fire_at, seq_no); seq_no is
the insertion counter, so events sharing an instant dispatch in the order
they were scheduled. Cancellation is lazy: cancelled events stay in the
heap and are skipped when popped.
"""
import heapq
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from app.constants import US_PER_SECOND

logger = logging.getLogger(__name__)

Handler = Callable[[Any, int], None]


class SimulationError(RuntimeError):
    """Fatal error inside a simulation run (bad schedule, bad link, failing handler)."""

    def __init__(self, message: str, event: Optional['Event'] = None):
        super().__init__(message)
        self.event = event

    def __str__(self) -> str:
        base = super().__str__()
        if self.event is None:
            return base
        return (f"{base} [event #{self.event.seq_no} at {self.event.fire_at}us "
                f"-> {self.event.target}: {type(self.event.payload).__name__}]")


@dataclass(slots=True)
class Event:
    fire_at: int
    seq_no: int
    target: str
    payload: Any
    cancelled: bool = field(default=False, compare=False)


class EventQueue:
    """Priority queue of events plus the virtual clock that drives a run."""

    def __init__(self):
        self._heap: List[Tuple[int, int, Event]] = []
        self._handlers: Dict[str, Handler] = {}
        self._next_seq = 0
        self._now = 0
        self.dispatched_total = 0

    @property
    def now(self) -> int:
        return self._now

    def register(self, target: str, handler: Handler) -> None:
        """Bind an endpoint identifier to the callable that receives its events."""
        self._handlers[target] = handler

    def schedule(self, at: int, target: str, payload: Any) -> Event:
        """
        Enqueue payload for delivery to target at virtual time `at`.

        Args:
            at: Absolute fire time in microseconds
            target: Registered endpoint identifier
            payload: Packet or timer token handed to the handler

        Returns:
            Event: handle usable with cancel()

        Raises:
            SimulationError: if `at` lies before the current virtual time
        """
        if at < self._now:
            raise SimulationError(
                f"cannot schedule {type(payload).__name__} for {target} at {at}us, "
                f"clock is already at {self._now}us"
            )
        event = Event(at, self._next_seq, target, payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (at, event.seq_no, event))
        return event

    @staticmethod
    def cancel(event: Optional[Event]) -> None:
        if event is not None:
            event.cancelled = True

    def pending(self, predicate: Optional[Callable[[Event], bool]] = None) -> int:
        """Count queued, non-cancelled events, optionally filtered."""
        return sum(
            1 for _, _, event in self._heap
            if not event.cancelled and (predicate is None or predicate(event))
        )

    def peek_time(self) -> Optional[int]:
        while self._heap and self._heap[0][2].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end: int) -> int:
        """
        Dispatch every event with fire_at <= t_end in (fire_at, seq_no) order.

        The clock is left at t_end afterwards, also when the queue ran dry
        earlier.

        Returns:
            int: number of events dispatched by this call
        """
        dispatched = 0
        while self._heap and self._heap[0][0] <= t_end:
            fire_at, _, event = heapq.heappop(self._heap)
            if event.cancelled:
                continue
            self._now = fire_at
            handler = self._handlers.get(event.target)
            if handler is None:
                raise SimulationError(f"no handler registered for '{event.target}'", event)
            try:
                handler(event.payload, fire_at)
            except SimulationError as e:
                if e.event is None:
                    e.event = event
                logger.error(f"Simulation aborted: {e}")
                raise
            except Exception as e:
                logger.error(f"Handler for {event.target} failed at {fire_at}us: {e}")
                raise SimulationError(f"handler failed: {e}", event) from e
            dispatched += 1
        self._now = max(self._now, t_end)
        self.dispatched_total += dispatched
        return dispatched


@dataclass
class Link:
    """
    One-directional constant-delay link.

    Arrival is sent_at + transmission time + propagation delay. Queuing is
    not modelled, but a packet never arrives before one sent earlier on the
    same link.
    """
    propagation_delay: int
    transmission_rate: int
    src: str
    dst: str
    _last_arrival: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.propagation_delay <= 0:
            raise SimulationError(
                f"link {self.src}->{self.dst}: propagation_delay must be > 0"
            )
        if self.transmission_rate <= 0:
            raise SimulationError(
                f"link {self.src}->{self.dst}: transmission_rate must be > 0"
            )

    def transmission_us(self, size: int) -> int:
        # ceil(size / rate) in microseconds, integer only
        return -(-size * US_PER_SECOND // self.transmission_rate)

    def one_way_delay(self, size: int) -> int:
        return self.transmission_us(size) + self.propagation_delay

    def deliver(self, queue: EventQueue, pkt: Any, size: int, sent_at: int) -> int:
        """Schedule pkt's arrival at dst and return the arrival instant."""
        if size <= 0:
            raise SimulationError(f"link {self.src}->{self.dst}: packet size must be > 0")
        arrival = max(sent_at + self.one_way_delay(size), self._last_arrival)
        self._last_arrival = arrival
        queue.schedule(arrival, self.dst, pkt)
        return arrival
