"""
Model-vs-simulation comparison: checks a run's metrics against the
closed-form predictions and the scenario's declared expectations.
"""
import logging
from typing import List, Optional

from app.constants import (
    ACK_DUPLICATOR,
    DATA_DUPLICATOR,
    SPEEDUP_MULTI,
    SPEEDUP_SINGLE,
    STATUS_FAIL,
    STATUS_INFO,
    STATUS_PASS,
    STATUS_UNTESTABLE,
    STEADY_STATE_SAMPLES,
    STRATEGY_NONE,
    US_PER_SECOND,
)
from app.models.metrics import EpochSample, RunMetrics
from app.models.report import AttackParams, ComparisonReport
from app.models.scenario import ScenarioConfig
from app.services.analytics import MODE_DERIVED, MODE_PROSE, AnalyticsService
from app.services.rttp import RTTP_OFF

logger = logging.getLogger(__name__)

# extra MSS allowed above 2T/rtt for the steady-state maximum
CWND_MAX_SLACK = 3
BASELINE_TOLERANCE = 0.05
THROUGHPUT_FLOOR = 0.5
# ssthresh never drops below two segments
WINDOW_FLOOR = 2


def _status(ok: bool) -> str:
    return STATUS_PASS if ok else STATUS_FAIL


class ComparisonService:
    """Builds comparison reports for finished runs."""

    @staticmethod
    def attack_params_for(cfg: ScenarioConfig, metrics: Optional[RunMetrics] = None) -> AttackParams:
        """
        Prediction inputs for a scenario. cwnd0 is the window at the first
        attack epoch when the run has one, otherwise the configured initial window.
        """
        cwnd0 = float(cfg.tcp_initial_cwnd)
        if metrics is not None and metrics.epoch_samples:
            cwnd0 = metrics.epoch_samples[0].cwnd
        return AttackParams(
            T=cfg.period,
            rtt=cfg.rtt,
            cwnd0=cwnd0,
            W=cfg.anti_replay_window,
            mss=cfg.mss,
            R=cfg.rate,
            d_prop=cfg.rtt // 2,
            L=cfg.mss,
            copies=cfg.adversary_copies,
        )

    @staticmethod
    def steady_state_index(samples: List[EpochSample],
                           run_length: int = STEADY_STATE_SAMPLES) -> Optional[int]:
        """First epoch index from which `run_length` consecutive samples satisfy the condition pairwise."""
        cwnds = [s.cwnd for s in samples]
        for i in range(len(cwnds) - run_length + 1):
            if all(
                AnalyticsService.steady_state_condition(cwnds[k], cwnds[k + 1])
                for k in range(i, i + run_length - 1)
            ):
                return i
        return None

    @staticmethod
    def _steady_window(metrics: RunMetrics, index: int):
        """Average cwnd (MSS) and throughput (B/s) between sample `index` and the last sample."""
        first, last = metrics.epoch_samples[index], metrics.epoch_samples[-1]
        span = (last.time_us - first.time_us) / US_PER_SECOND
        if span <= 0:
            return None, None
        avg_cwnd = (last.cwnd_area - first.cwnd_area) / span
        throughput = (last.segments_acked - first.segments_acked) * metrics.bytes_acked / max(
            metrics.segments_acked, 1) / span
        return avg_cwnd, throughput

    @staticmethod
    def _long_run_throughput(metrics: RunMetrics) -> Optional[float]:
        if not metrics.epoch_samples:
            return None
        first = metrics.epoch_samples[0]
        span = (metrics.elapsed_us - first.time_us) / US_PER_SECOND
        if span <= 0 or metrics.segments_acked == 0:
            return None
        mss = metrics.bytes_acked / metrics.segments_acked
        return (metrics.segments_acked - first.segments_acked) * mss / span

    @staticmethod
    def _realized_epoch_gap(samples: List[EpochSample], index: Optional[int]) -> Optional[float]:
        """Mean time between strikes, from the steady-state epoch on when that leaves two samples."""
        if index is not None and len(samples) - index >= 2:
            samples = samples[index:]
        if len(samples) < 2:
            return None
        return (samples[-1].time_us - samples[0].time_us) / (len(samples) - 1)

    @staticmethod
    def compare_with_model(metrics: RunMetrics, params: AttackParams, tolerance: float = 0.25,
                           cfg: Optional[ScenarioConfig] = None,
                           baseline: Optional[RunMetrics] = None) -> ComparisonReport:
        """
        Compare simulated dynamics with the closed-form predictions.

        Args:
            metrics: Metrics of the run to judge
            params: Prediction inputs (see attack_params_for)
            tolerance: Relative tolerance for throughput comparisons
            cfg: Scenario, for its expect_* declarations
            baseline: Metrics of the unattacked reference run, if any

        Returns:
            ComparisonReport: one row per checked claim
        """
        report = ComparisonReport(scenario=metrics.scenario, strategy=metrics.strategy,
                                  tolerance=tolerance)
        report.steady_state_index = ComparisonService.steady_state_index(metrics.epoch_samples)

        if metrics.strategy in (ACK_DUPLICATOR, DATA_DUPLICATOR):
            ComparisonService._duplicator_rows(report, metrics, params)
        elif metrics.strategy == SPEEDUP_MULTI:
            ComparisonService._speedup_multi_rows(report, metrics, params, tolerance)
        elif metrics.strategy == SPEEDUP_SINGLE:
            ComparisonService._speedup_single_rows(report, metrics, params)
        else:
            ComparisonService._baseline_rows(report, metrics, params)

        ComparisonService._integrity_rows(report, metrics)
        if cfg is not None:
            ComparisonService._expectation_rows(report, metrics, cfg, baseline)

        failed = [row.claim for row in report.rows if row.status == STATUS_FAIL]
        if failed:
            logger.warning(f"{metrics.scenario}: failed comparisons: {', '.join(failed)}")
        else:
            logger.info(f"{metrics.scenario}: {len(report.rows)} comparison rows, none failed")
        return report

    @staticmethod
    def _duplicator_rows(report: ComparisonReport, metrics: RunMetrics, params: AttackParams) -> None:
        T, rtt = params.T, params.rtt
        index = report.steady_state_index
        if index is None:
            for claim in ('steady_state_cwnd_max', 'steady_state_cwnd_avg',
                          'steady_state_throughput', 'epochs_to_steady_state'):
                report.add(claim, 'steady state', STATUS_UNTESTABLE,
                           note=f"steady state not reached in {len(metrics.epoch_samples)} epochs")
            return

        bound = AnalyticsService.steady_state_cwnd_max(T, rtt) + CWND_MAX_SLACK
        steady_max = max(s.cwnd for s in metrics.epoch_samples[index:])
        report.add('steady_state_cwnd_max', 'max epoch cwnd (MSS)', _status(steady_max <= bound),
                   steady_max, bound, note='bound is 2T/rtt + 3')

        avg_cwnd, throughput = ComparisonService._steady_window(metrics, index)
        if avg_cwnd is None:
            report.add('steady_state_cwnd_avg', 'avg cwnd (MSS)', STATUS_UNTESTABLE,
                       note='fewer than two steady epochs')
        else:
            derived = AnalyticsService.steady_state_cwnd_avg(T, rtt, MODE_DERIVED)
            prose = AnalyticsService.steady_state_cwnd_avg(T, rtt, MODE_PROSE)
            nearer = MODE_DERIVED if abs(avg_cwnd - derived) <= abs(avg_cwnd - prose) else MODE_PROSE
            report.add('steady_state_cwnd_avg', 'avg cwnd (MSS)', STATUS_INFO, avg_cwnd, derived,
                       note=f"nearer {nearer} (derived {derived:g}, prose {prose:g})")
            predicted = AnalyticsService.steady_state_throughput(T, rtt, params.mss)
            report.add('steady_state_throughput', 'throughput (B/s)', STATUS_INFO,
                       throughput, predicted, note=f"ratio {throughput / predicted:.2f}")

        if T < rtt:
            report.add('epochs_to_steady_state', 'epoch index', STATUS_UNTESTABLE,
                       index, note='epoch analysis needs T >= rtt')
            return
        try:
            epochs_bound = AnalyticsService.epochs_to_steady_state(params.cwnd0, T, rtt)
        except ValueError as e:
            report.add('epochs_to_steady_state', 'epoch index', STATUS_UNTESTABLE, index, note=str(e))
            return
        report.add('epochs_to_steady_state', 'epoch index', _status(index <= epochs_bound + 1),
                   index, epochs_bound, note='one epoch of detection slack')

    @staticmethod
    def _speedup_multi_rows(report: ComparisonReport, metrics: RunMetrics, params: AttackParams,
                            tolerance: float) -> None:
        T, rtt = params.T, params.rtt
        gap = ComparisonService._realized_epoch_gap(metrics.epoch_samples, report.steady_state_index)
        # a strike needs copies + 1 segments in one flight; from the ssthresh
        # floor the window regrows one segment per round trip
        fastest = (params.copies - WINDOW_FLOOR + 2) * rtt
        achievable = max(T, fastest)
        if gap is None:
            report.add('epoch_period', 'strike gap (us)', STATUS_UNTESTABLE, predicted=achievable,
                       note='fewer than two strikes')
        else:
            ok = gap <= achievable * (1 + tolerance)
            report.add('epoch_period', 'strike gap (us)', _status(ok), gap, achievable,
                       note=f"T={T}us, no faster than {fastest}us with {params.copies} copies")

        cadence = f", strikes every {gap / US_PER_SECOND:.3g}s" if gap is not None else ''
        predicted = AnalyticsService.steady_state_throughput(T, rtt, params.mss)
        simulated = ComparisonService._long_run_throughput(metrics)
        if AnalyticsService.steady_state_cwnd_avg(T, rtt) < WINDOW_FLOOR:
            report.add('steady_state_throughput', 'throughput (B/s)', STATUS_UNTESTABLE,
                       simulated, predicted,
                       note=f"predicted average window is below the {WINDOW_FLOOR} MSS ssthresh floor{cadence}")
        elif simulated is None:
            report.add('steady_state_throughput', 'throughput (B/s)', STATUS_UNTESTABLE,
                       predicted=predicted, note='no attack epoch happened')
        else:
            ratio = simulated / predicted
            ok = THROUGHPUT_FLOOR <= ratio <= 1 + tolerance
            report.add('steady_state_throughput', 'throughput (B/s)', _status(ok),
                       simulated, predicted,
                       note=f"ratio {ratio:.2f}, band [{THROUGHPUT_FLOOR:g}, {1 + tolerance:g}]{cadence}")

        index = report.steady_state_index
        if index is None:
            report.add('steady_state_cwnd_max', 'max epoch cwnd (MSS)', STATUS_UNTESTABLE,
                       note='steady state not reached')
            return
        steady_max = max(s.cwnd for s in metrics.epoch_samples[index:])
        report.add('steady_state_cwnd_max', 'max epoch cwnd (MSS)', STATUS_INFO,
                   steady_max, 2 * (T / rtt + 1), note='predicted 2(T/rtt + 1)')

    @staticmethod
    def _speedup_single_rows(report: ComparisonReport, metrics: RunMetrics, params: AttackParams) -> None:
        W = params.W
        report.add('left_of_window_drops', 'legit drops', STATUS_INFO, metrics.legit_drops)
        if W < 1:
            report.add('rto_dichotomy', 'RTOs', STATUS_UNTESTABLE, metrics.rto_count,
                       note='anti-replay window disabled')
            return
        if metrics.shares_sa:
            report.add('rto_dichotomy', 'RTOs', STATUS_UNTESTABLE, metrics.rto_count,
                       note=f"{metrics.cross_traffic_sent} cross-traffic packets share the SA; "
                            f"the ESP distance no longer follows cwnd")
            return

        feasible = next(
            (s for s in metrics.epoch_samples if AnalyticsService.rto_feasible(max(s.cwnd, 1), W)),
            None,
        )
        if feasible is None:
            report.add('rto_dichotomy', 'RTOs', _status(metrics.rto_count == 0), metrics.rto_count, 0,
                       note=f"floor(cwnd/2) - 1 > {W} never held; fast retransmit halving only")
            return
        horizon = feasible.time_us + 2 * params.T
        hit = any(feasible.time_us <= t <= horizon for t in metrics.rto_times)
        report.add('rto_dichotomy', 'RTOs', _status(hit), metrics.rto_count, 1,
                   note=f"cwnd {feasible.cwnd:g} at {feasible.time_us}us; RTO expected within 2T")

    @staticmethod
    def _baseline_rows(report: ComparisonReport, metrics: RunMetrics, params: AttackParams) -> None:
        expected = metrics.avg_cwnd * params.mss * US_PER_SECOND / params.rtt
        if metrics.elapsed_us != metrics.duration_us or expected <= 0:
            report.add('baseline_throughput', 'throughput (B/s)', STATUS_INFO,
                       metrics.throughput_Bps, expected or None, note='finite transfer')
        else:
            ratio = metrics.throughput_Bps / expected
            report.add('baseline_throughput', 'throughput (B/s)',
                       _status(abs(ratio - 1) <= BASELINE_TOLERANCE),
                       metrics.throughput_Bps, expected, note=f"avg cwnd x mss / rtt, ratio {ratio:.3f}")

        required = AnalyticsService.required_window_size(params.R, params.d_prop, params.L)
        if params.W >= required:
            report.add('baseline_drops', 'legit drops', _status(metrics.legit_drops == 0),
                       metrics.legit_drops, 0, note=f"W={params.W} >= {required}")
        else:
            report.add('baseline_drops', 'legit drops', STATUS_INFO, metrics.legit_drops, 0,
                       note=f"W={params.W} below {required}")

    @staticmethod
    def _integrity_rows(report: ComparisonReport, metrics: RunMetrics) -> None:
        report.add('conservation', 'segments', _status(metrics.conservation_ok),
                   metrics.transmissions)
        if metrics.strategy != STRATEGY_NONE:
            report.add('budget_soundness', 'injections', _status(metrics.budget_sound),
                       metrics.injections_total)
            report.add('provenance', 'injections', _status(metrics.provenance_ok),
                       metrics.injections_total)
        if metrics.rttp != RTTP_OFF:
            report.add('rttp_hold_delay', 'max hold (us)',
                       _status(metrics.rttp_max_hold_delay_us <= metrics.rttp_typical_delay_us),
                       metrics.rttp_max_hold_delay_us, metrics.rttp_typical_delay_us)

    @staticmethod
    def _expectation_rows(report: ComparisonReport, metrics: RunMetrics, cfg: ScenarioConfig,
                          baseline: Optional[RunMetrics]) -> None:
        checks = [
            ('expect_fast_retransmits_min', metrics.fast_retransmits, cfg.expect_fast_retransmits_min, '>='),
            ('expect_fast_retransmits_max', metrics.fast_retransmits, cfg.expect_fast_retransmits_max, '<='),
            ('expect_legit_drops_min', metrics.legit_drops, cfg.expect_legit_drops_min, '>='),
            ('expect_legit_drops_max', metrics.legit_drops, cfg.expect_legit_drops_max, '<='),
            ('expect_rto_min', metrics.rto_count, cfg.expect_rto_min, '>='),
            ('expect_rto_max', metrics.rto_count, cfg.expect_rto_max, '<='),
        ]
        for claim, value, limit, op in checks:
            if limit is None:
                continue
            ok = value >= limit if op == '>=' else value <= limit
            report.add(claim, claim.split('_', 1)[1], _status(ok), value, limit)

        if cfg.expect_throughput_ratio_min is None and cfg.expect_throughput_ratio_max is None:
            return
        if baseline is None or baseline.throughput_Bps <= 0:
            report.add('expect_throughput_ratio', 'throughput / baseline', STATUS_UNTESTABLE,
                       note='no baseline run')
            return
        ratio = metrics.throughput_Bps / baseline.throughput_Bps
        low = cfg.expect_throughput_ratio_min if cfg.expect_throughput_ratio_min is not None else 0.0
        high = cfg.expect_throughput_ratio_max if cfg.expect_throughput_ratio_max is not None else float('inf')
        report.add('expect_throughput_ratio', 'throughput / baseline', _status(low <= ratio <= high),
                   ratio, note=f"band [{low:g}, {high:g}]")
