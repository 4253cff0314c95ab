"""
Closed-form predictions for the attacks, used standalone (`predict`) and as
oracles against simulated runs.

All functions are pure. Times are integer microseconds, windows are MSS,
rates are bytes per second.
"""
import logging
import math
from fractions import Fraction
from typing import Union

from app.constants import US_PER_SECOND

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]

MODE_DERIVED = 'derived'
MODE_STATED = 'stated'
MODE_PROSE = 'prose'
MODE_ALTERNATE = 'alternate'


def _require_positive(**values: Number) -> None:
    for name, value in values.items():
        if value is None or value <= 0:
            raise ValueError(f"{name} must be > 0 (got {value})")


class AnalyticsService:
    """Bounds on congestion window, throughput and epochs under attack."""

    @staticmethod
    def epoch_period(rho: Number, copies: int = 3) -> int:
        """Attack epoch period T = copies / rho, in microseconds."""
        _require_positive(rho=rho, copies=copies)
        return round(Fraction(copies) * US_PER_SECOND / Fraction(str(rho)))

    @staticmethod
    def steady_state_cwnd_max(T: int, rtt: int, mode: str = MODE_DERIVED) -> float:
        """
        Upper bound on the steady-state congestion window, in MSS.

        Args:
            T: Attack epoch period (us)
            rtt: Round-trip time (us)
            mode: 'derived' gives 2T/rtt; 'stated' gives the claim's literal
                3/(2 rtt) with rtt in seconds, which lacks the T factor

        Returns:
            float: window bound in MSS
        """
        _require_positive(T=T, rtt=rtt)
        if mode == MODE_STATED:
            return float(Fraction(3 * US_PER_SECOND, 2 * rtt))
        if mode != MODE_DERIVED:
            raise ValueError(f"unknown mode '{mode}'")
        return 2 * T / rtt

    @staticmethod
    def cwnd_max_from_rate(rho: Number, rtt: int) -> float:
        """6 / (rho * rtt): the same bound written in terms of the adversary rate."""
        _require_positive(rho=rho, rtt=rtt)
        return float(6 / (Fraction(str(rho)) * Fraction(rtt, US_PER_SECOND)))

    @staticmethod
    def steady_state_cwnd_avg(T: int, rtt: int, mode: str = MODE_DERIVED) -> float:
        """Average steady-state window: 3T/(2 rtt) derived, 3T/rtt in the prose reading."""
        _require_positive(T=T, rtt=rtt)
        if mode == MODE_PROSE:
            return 3 * T / rtt
        if mode != MODE_DERIVED:
            raise ValueError(f"unknown mode '{mode}'")
        return 3 * T / (2 * rtt)

    @staticmethod
    def steady_state_throughput(T: int, rtt: int, mss: int, mode: str = MODE_DERIVED) -> float:
        """
        Steady-state throughput bound in bytes/s: (3T / (2 rtt^2)) * mss, or
        (2T / rtt^2) * mss in alternate mode.
        """
        _require_positive(T=T, rtt=rtt, mss=mss)
        per_second = Fraction(T * US_PER_SECOND, rtt * rtt)
        if mode == MODE_ALTERNATE:
            return float(2 * per_second * mss)
        if mode != MODE_DERIVED:
            raise ValueError(f"unknown mode '{mode}'")
        return float(Fraction(3, 2) * per_second * mss)

    @staticmethod
    def epochs_to_steady_state(cwnd0: Number, T: int, rtt: int) -> int:
        """
        Inclusive upper bound on attack epochs before the window settles:
        ceil(log2(cwnd0 - 2T/rtt - 2) - 1).

        Raises:
            ValueError: if cwnd0 - 2T/rtt - 2 <= 1 (outside the formula's domain)
        """
        _require_positive(cwnd0=cwnd0, T=T, rtt=rtt)
        argument = Fraction(cwnd0) - Fraction(2 * T, rtt) - 2
        if argument <= 1:
            raise ValueError(
                f"cwnd0={cwnd0} too small for T/rtt={T / rtt:g}: "
                f"need cwnd0 - 2T/rtt - 2 > 1"
            )
        return math.ceil(math.log2(argument) - 1)

    @staticmethod
    def rto_feasible(cwnd: Number, W: int) -> bool:
        """True when a single sped-up copy can force a timeout: floor(cwnd/2) - 1 > W."""
        if cwnd < 1 or W < 1:
            raise ValueError("cwnd and W must be >= 1")
        return math.floor(cwnd) // 2 - 1 > W

    @staticmethod
    def required_window_size(R: Number, d_prop: int, L: int) -> int:
        """
        Packets that can be in transit: ceil(R * d_prop / L).

        Args:
            R: Transmission rate (bytes/s)
            d_prop: Propagation delay (us)
            L: Packet size (bytes)
        """
        _require_positive(R=R, d_prop=d_prop, L=L)
        return math.ceil(Fraction(str(R)) * Fraction(d_prop, US_PER_SECOND) / L)

    @staticmethod
    def steady_state_condition(cwnd_i: Number, cwnd_i_plus_1: Number) -> bool:
        """Window at epoch i no longer exceeds the next one by a full MSS."""
        _require_positive(cwnd_i=cwnd_i, cwnd_i_plus_1=cwnd_i_plus_1)
        return cwnd_i < cwnd_i_plus_1 + 1
