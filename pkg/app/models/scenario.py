"""
Pydantic model for a scenario: topology, tunnel, TCP, adversary and RTTP
settings for one simulated flow.
"""
import logging
from fractions import Fraction
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import Config
from app.constants import (
    ACK_DUPLICATOR,
    BOTH_DIRECTIONS,
    CLIENT_TO_SERVER,
    DATA_DUPLICATOR,
    SERVER_TO_CLIENT,
    SPEEDUP_MULTI,
    SPEEDUP_SINGLE,
    STRATEGY_NONE,
    US_PER_SECOND,
)

logger = logging.getLogger(__name__)

Strategy = Literal['none', 'ack_duplicator', 'data_duplicator', 'speedup_single', 'speedup_multi']
Direction = Literal['client_to_server', 'server_to_client', 'both']


class ScenarioConfig(BaseModel):
    """
    One scenario. Durations are microseconds, sizes bytes, rates bytes/s.

    Topology: server --LAN-- gw2 ==WAN== gw1 --LAN-- client, with the WAN
    one-way delay chosen so that the propagation delays add up to `rtt`.
    """
    model_config = ConfigDict(extra='forbid', frozen=True)

    name: str = 'scenario'

    rtt: int = 100_000
    lan_delay: int = 1_000
    rate: int = 10_000_000
    mss: int = 1000
    ack_size: int = 40
    duration: int = 60 * US_PER_SECOND
    transfer_segments: int = 0

    anti_replay_window: int = 64
    sa_policy: Literal['single', 'per_flow'] = 'single'
    cross_traffic_rate: float = 0

    tcp_initial_cwnd: int = 1
    tcp_initial_ssthresh: int = 64
    tcp_receiver_window: int = 0
    tcp_rto: Optional[int] = None

    adversary: Strategy = STRATEGY_NONE
    adversary_rho: Optional[float] = None
    adversary_sigma: int = 3
    adversary_period: Optional[int] = None
    adversary_speedup: Optional[int] = None
    adversary_direction: Optional[Direction] = None
    adversary_observability: Literal['transparent', 'opaque'] = 'transparent'
    adversary_copies: int = 3
    adversary_start: int = 0
    adversary_tap: float = 0.5
    adversary_stale: bool = False
    adversary_memory: int = 64

    rttp: Literal['off', 'aggressive', 'trivial'] = 'off'
    rttp_guard: float = 0.85
    rttp_alpha: float = 0.125
    rttp_capacity: int = 64

    scripted_drops: List[int] = Field(default_factory=list)
    seed: int = 1
    tolerance: float = Config.DEFAULT_TOLERANCE

    baseline_scenario: Optional[str] = None
    expect_fast_retransmits_min: Optional[int] = None
    expect_fast_retransmits_max: Optional[int] = None
    expect_legit_drops_min: Optional[int] = None
    expect_legit_drops_max: Optional[int] = None
    expect_rto_min: Optional[int] = None
    expect_rto_max: Optional[int] = None
    expect_throughput_ratio_min: Optional[float] = None
    expect_throughput_ratio_max: Optional[float] = None

    @field_validator('anti_replay_window', 'transfer_segments', 'tcp_receiver_window',
                     'adversary_start', 'seed', 'cross_traffic_rate')
    @classmethod
    def validate_non_negative(cls, v: int, info) -> int:
        if v < 0:
            raise ValueError(f"{info.field_name} must be ≥ 0")
        return v

    @field_validator('rtt', 'lan_delay', 'rate', 'mss', 'ack_size', 'duration',
                     'tcp_initial_cwnd', 'adversary_sigma', 'adversary_copies',
                     'adversary_memory', 'rttp_capacity')
    @classmethod
    def validate_positive(cls, v: int, info) -> int:
        if v <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v

    @field_validator('tcp_rto', 'adversary_period', 'adversary_speedup', 'adversary_rho')
    @classmethod
    def validate_optional_positive(cls, v, info):
        if v is not None and v <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v

    @field_validator('tcp_initial_ssthresh')
    @classmethod
    def validate_ssthresh(cls, v: int) -> int:
        if v < 2:
            raise ValueError("tcp_initial_ssthresh must be ≥ 2")
        return v

    @field_validator('adversary_tap')
    @classmethod
    def validate_tap(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("adversary_tap must lie strictly between 0 and 1")
        return v

    @field_validator('rttp_guard', 'rttp_alpha', 'tolerance')
    @classmethod
    def validate_fraction(cls, v: float, info) -> float:
        if not 0 < v <= 1:
            raise ValueError(f"{info.field_name} must lie in (0, 1]")
        return v

    @field_validator('scripted_drops')
    @classmethod
    def validate_drops(cls, v: List[int]) -> List[int]:
        if any(seq < 0 for seq in v):
            raise ValueError("scripted_drops must list segment numbers ≥ 0")
        return sorted(set(v))

    @model_validator(mode='after')
    def validate_model(self) -> 'ScenarioConfig':
        """Cross-field checks. Messages start with the offending key."""
        if self.wan_delay <= 0:
            raise ValueError(
                f"lan_delay: 4 x lan_delay must stay below rtt ({self.rtt}us) "
                f"to leave a positive WAN delay"
            )
        if self.adversary == STRATEGY_NONE:
            return self
        if self.adversary_rho is None and self.adversary_period is None:
            raise ValueError("adversary_rho: set adversary_rho or adversary_period for an attack")
        if self.adversary in (SPEEDUP_SINGLE, SPEEDUP_MULTI):
            if not self.speedup < self.remaining_delay:
                raise ValueError(
                    f"adversary_speedup: must be < the honest delay still ahead of the "
                    f"tapped packet ({self.remaining_delay}us); the adversary path "
                    f"cannot be instantaneous"
                )
        return self

    @property
    def wan_delay(self) -> int:
        return self.rtt // 2 - 2 * self.lan_delay

    @property
    def tap_delay(self) -> int:
        return round(self.wan_delay * self.adversary_tap)

    @property
    def remaining_delay(self) -> int:
        return self.wan_delay - self.tap_delay

    @property
    def rto(self) -> int:
        return self.tcp_rto if self.tcp_rto is not None else 4 * self.rtt

    @property
    def speedup(self) -> int:
        if self.adversary_speedup is not None:
            return self.adversary_speedup
        return self.wan_delay // 4

    @property
    def copies_per_strike(self) -> int:
        return 1 if self.adversary == SPEEDUP_SINGLE else self.adversary_copies

    @property
    def rho(self) -> Optional[Fraction]:
        """Adversary rate in packets/s; defaults to copies per epoch period."""
        if self.adversary_rho is not None:
            return Fraction(str(self.adversary_rho))
        if self.adversary_period is not None:
            return Fraction(self.copies_per_strike * US_PER_SECOND, self.adversary_period)
        return None

    @property
    def period(self) -> Optional[int]:
        """Attack epoch period T; defaults to copies / rho."""
        if self.adversary_period is not None:
            return self.adversary_period
        if self.adversary_rho is not None:
            return round(self.copies_per_strike * US_PER_SECOND / self.rho)
        return None

    @property
    def direction(self) -> str:
        if self.adversary_direction is not None:
            return self.adversary_direction
        if self.adversary == ACK_DUPLICATOR:
            return CLIENT_TO_SERVER
        if self.adversary in (DATA_DUPLICATOR, SPEEDUP_SINGLE, SPEEDUP_MULTI):
            return SERVER_TO_CLIENT
        return BOTH_DIRECTIONS

    @property
    def under_attack(self) -> bool:
        return self.adversary != STRATEGY_NONE
