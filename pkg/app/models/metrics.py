"""
Pydantic models for what a simulation run measures.
"""
from typing import Dict, List, NamedTuple

from pydantic import BaseModel, Field

TRACE_COLUMNS = ['time_us', 'cwnd_mss_fixedpoint', 'phase', 'event']


class TraceRow(NamedTuple):
    time_us: int
    cwnd_mss_fixedpoint: int
    phase: str
    event: str


class EpochSample(BaseModel):
    """Sender window when the first injected copy of a strike reaches its gateway."""
    index: int
    strike_id: int
    time_us: int
    cwnd: float
    phase: str
    segments_acked: int
    cwnd_area: float = Field(description="time integral of cwnd up to time_us, MSS*s")


class RunMetrics(BaseModel):
    """Scalar metrics, epoch samples and the (optional) cwnd trace of a run."""
    scenario: str
    seed: int
    strategy: str
    rttp: str
    anti_replay_window: int
    sa_policy: str = 'single'
    duration_us: int
    elapsed_us: int
    events_dispatched: int = 0

    transmissions: int = 0
    retransmissions: int = 0
    segments_sent: int = 0
    segments_acked: int = 0
    bytes_sent: int = 0
    bytes_acked: int = 0
    throughput_Bps: float = 0.0
    fast_retransmits: int = 0
    rto_count: int = 0
    rto_times: List[int] = Field(default_factory=list)
    fast_retransmit_times: List[int] = Field(default_factory=list)
    avg_cwnd: float = 0.0
    max_cwnd: float = 0.0
    final_cwnd: float = 0.0

    antireplay_drops: Dict[str, int] = Field(default_factory=dict)
    legit_drops: int = 0
    scripted_drops_applied: int = 0
    in_flight_data: int = 0
    conservation_ok: bool = True

    cross_traffic_sent: int = 0
    cross_traffic_delivered: int = 0
    cross_traffic_dropped: int = 0

    strikes: int = 0
    epochs_skipped: int = 0
    injections_total: int = 0
    injections_accepted: int = 0
    injections_rejected: int = 0
    injections_in_flight: int = 0
    budget_sound: bool = True
    provenance_ok: bool = True

    rttp_suspicious: int = 0
    rttp_holds: int = 0
    rttp_releases: int = 0
    rttp_discards: int = 0
    rttp_overflows: int = 0
    rttp_collisions: int = 0
    rttp_max_hold_delay_us: int = 0
    rttp_typical_delay_us: int = 0

    epoch_samples: List[EpochSample] = Field(default_factory=list)
    trace: List[TraceRow] = Field(default_factory=list, exclude=True)

    def summary(self) -> dict:
        """Every scalar plus epoch samples, in declaration order; the trace is left out."""
        return self.model_dump(mode='json')

    @property
    def shares_sa(self) -> bool:
        """Other traffic interleaved its ESP sequence numbers with the flow's."""
        return self.sa_policy == 'single' and self.cross_traffic_sent > 0
