"""
Shipped scenarios, shortened so the suite stays quick.
"""
from pathlib import Path

import pytest

from app.constants import STATUS_FAIL, STATUS_PASS, STATUS_UNTESTABLE
from app.services.comparison_service import ComparisonService
from app.services.scenario_service import ScenarioService
from app.services.simulation_service import SimulationService

SCENARIO_DIR = Path(__file__).resolve().parents[1] / 'data' / 'scenarios'


def load(name, seconds):
    cfg = ScenarioService.load_scenario(SCENARIO_DIR / f'{name}.scn')
    return cfg.model_copy(update={'duration': seconds * 1_000_000})


def run(name, seconds):
    cfg = load(name, seconds)
    return cfg, SimulationService.run_scenario(cfg, 'off')


def compare(cfg, metrics, baseline=None):
    params = ComparisonService.attack_params_for(cfg, metrics)
    return ComparisonService.compare_with_model(metrics, params, cfg.tolerance, cfg=cfg, baseline=baseline)


@pytest.mark.parametrize('path', sorted(SCENARIO_DIR.glob('*.scn')), ids=lambda p: p.stem)
def test_shipped_scenarios_parse(path):
    cfg = ScenarioService.load_scenario(path)
    assert cfg.name == path.stem
    if cfg.baseline_scenario:
        assert (SCENARIO_DIR / f'{cfg.baseline_scenario}.scn').exists()


def test_baseline_matches_window_over_rtt():
    cfg, metrics = run('baseline', 10)
    report = compare(cfg, metrics)
    assert report.passed
    assert metrics.legit_drops == 0
    assert metrics.max_cwnd == 64


def test_ack_duplication_collapses_window():
    cfg, metrics = run('ack_dup_T1', 20)
    report = compare(cfg, metrics)
    assert report.steady_state_index is not None
    assert report.passed
    assert metrics.avg_cwnd < 8
    assert metrics.budget_sound and metrics.provenance_ok


def test_single_speedup_forces_timeout():
    cfg, metrics = run('speedup_single_rto', 10)
    assert metrics.rto_count >= 1
    assert metrics.legit_drops > 0
    assert compare(cfg, metrics).passed


def test_single_speedup_without_room_only_halves():
    cfg, metrics = run('speedup_single_capped', 10)
    assert metrics.rto_count == 0
    assert compare(cfg, metrics).passed


def test_sized_window_defeats_single_speedup():
    cfg, metrics = run('speedup_single_sized', 10)
    assert metrics.legit_drops == 0
    assert metrics.fast_retransmits == 0


def test_multi_speedup_starves_flow():
    base_cfg, baseline = run('baseline', 10)
    cfg, metrics = run('speedup_multi_T1', 10)
    report = compare(cfg, metrics, baseline)
    ratio = next(row for row in report.rows if row.claim == 'expect_throughput_ratio')
    assert ratio.status == STATUS_PASS
    assert metrics.throughput_Bps < 0.2 * baseline.throughput_Bps


def test_rttp_neutralises_multi_speedup():
    _, baseline = run('baseline_rwnd32', 10)
    cfg, metrics = run('rttp_efficacy', 10)
    assert metrics.fast_retransmits == 0
    assert metrics.rttp_holds > 0
    assert metrics.rttp_max_hold_delay_us <= metrics.rttp_typical_delay_us
    assert compare(cfg, metrics, baseline).passed


def test_rttp_keeps_genuine_loss_recovery():
    cfg, metrics = run('rttp_liveness', 10)
    assert metrics.fast_retransmits >= 1
    assert compare(cfg, metrics).passed


def row(report, claim):
    return next(r for r in report.rows if r.claim == claim)


@pytest.mark.parametrize('name', ['speedup_multi_T1', 'speedup_multi_T2', 'speedup_multi_T5', 'speedup_multi_T10'])
def test_multi_speedup_strikes_on_schedule(name):
    cfg, metrics = run(name, 30)
    report = compare(cfg, metrics)
    assert row(report, 'epoch_period').status == STATUS_PASS
    assert row(report, 'steady_state_throughput').status != STATUS_FAIL
    gaps = [b.time_us - a.time_us for a, b in zip(metrics.epoch_samples, metrics.epoch_samples[1:])]
    # lead copies leave at most one gather apart from the epoch start
    assert min(gaps) >= cfg.period - cfg.speedup


def test_multi_speedup_at_two_rtt_matches_model():
    cfg, metrics = run('speedup_multi_T2', 30)
    report = compare(cfg, metrics)
    assert row(report, 'steady_state_throughput').status == STATUS_PASS
    assert report.passed


def test_shared_sa_lets_cross_traffic_reach_small_window():
    cfg, metrics = run('shared_sa_single', 10)
    report = compare(cfg, metrics)
    assert metrics.cross_traffic_sent > 0
    assert metrics.rto_count >= 1
    assert metrics.legit_drops >= 1
    assert row(report, 'rto_dichotomy').status == STATUS_UNTESTABLE
    assert report.passed


def test_per_flow_sa_keeps_cross_traffic_out_of_reach():
    cfg, metrics = run('shared_sa_per_flow', 10)
    assert metrics.cross_traffic_delivered == metrics.cross_traffic_sent - metrics.cross_traffic_dropped
    assert metrics.legit_drops == 0
    assert metrics.fast_retransmits == 0
    assert metrics.rto_count == 0
    assert metrics.strikes == 0
    assert compare(cfg, metrics).passed


def test_trivial_rttp_neutralises_multi_speedup():
    _, baseline = run('baseline_rwnd32', 10)
    cfg = load('rttp_efficacy', 10).model_copy(update={'rttp': 'trivial'})
    metrics = SimulationService.run_scenario(cfg, 'off')
    assert metrics.fast_retransmits == 0
    assert metrics.rttp_holds > 0
    assert metrics.throughput_Bps >= 0.9 * baseline.throughput_Bps
    assert compare(cfg, metrics, baseline).passed


def test_rttp_releases_held_acks_after_speedup_drop():
    cfg, metrics = run('rttp_release', 10)
    assert metrics.legit_drops >= 1
    assert metrics.rttp_holds > 0
    assert metrics.rttp_releases > 0
    assert metrics.fast_retransmits >= 1
    assert metrics.rto_count == 0
    assert metrics.rttp_max_hold_delay_us <= metrics.rttp_typical_delay_us
    assert compare(cfg, metrics).passed


def test_ack_duplication_scales_with_period_and_rtt():
    cfg, metrics = run('ack_dup_T1', 20)
    slow = cfg.model_copy(update={'rtt': 2 * cfg.rtt, 'adversary_period': 2 * cfg.adversary_period,
                                  'duration': 2 * cfg.duration})
    doubled = SimulationService.run_scenario(slow, 'off')
    assert doubled.avg_cwnd == pytest.approx(metrics.avg_cwnd, rel=0.2)
    assert doubled.throughput_Bps / metrics.throughput_Bps == pytest.approx(0.5, rel=0.2)
    assert ComparisonService.steady_state_index(doubled.epoch_samples) is not None
