"""
Command line entry point.

    stealthsim run data/scenarios/ack_dup_T1.scn --trace t.csv --summary s.json --audit a.json
    stealthsim predict --T 100ms --rtt 100ms --cwnd0 64
    stealthsim compare s.json data/scenarios/ack_dup_T1.scn
    stealthsim suite data/scenarios --jobs 4 --check-determinism

Exit status: 0 when every comparison passes, 1 on a failed comparison or a
simulation failure, 2 on usage or scenario errors.
"""
import logging
import sys
from pathlib import Path
from typing import Optional

import click
import pandas as pd

from app import __version__
from app.config import Config
from app.constants import STATUS_FAIL, TRACE_LEVELS
from app.models.metrics import RunMetrics
from app.models.report import ComparisonReport
from app.models.scenario import ScenarioConfig
from app.services.analytics import MODE_DERIVED, MODE_PROSE, MODE_STATED, AnalyticsService
from app.services.comparison_service import ComparisonService
from app.services.import_export import ImportExportService
from app.services.scenario_service import ScenarioParseError, ScenarioService
from app.services.simkernel import SimulationError
from app.services.simulation_service import SimulationService
from app.services.suite_service import SuiteService
from app.utils.logger_setup import setup_logger
from app.utils.units import format_duration, parse_duration, parse_rate, parse_size

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class _UnitType(click.ParamType):
    """click parameter backed by one of the unit parsers."""

    def __init__(self, name: str, parser):
        self.name = name
        self._parser = parser

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        try:
            return self._parser(value)
        except ValueError as e:
            self.fail(str(e), param, ctx)


DURATION = _UnitType('duration', parse_duration)
SIZE = _UnitType('size', parse_size)
RATE = _UnitType('rate', parse_rate)


def _echo_report(report: ComparisonReport) -> None:
    index = report.steady_state_index
    click.echo(f"comparison for {report.scenario} ({report.strategy}), "
               f"steady state at epoch {index if index is not None else '-'}")
    if not report.rows:
        click.echo("  no rows")
        return
    frame = pd.DataFrame([row.model_dump() for row in report.rows])
    click.echo(frame.to_string(index=False, na_rep='-', float_format=lambda v: f"{v:.4g}"))


def _echo_headline(metrics: RunMetrics) -> None:
    click.echo(
        f"{metrics.scenario}: {metrics.throughput_Bps:.0f} B/s, avg cwnd {metrics.avg_cwnd:.2f} MSS, "
        f"{metrics.fast_retransmits} fast retransmits, {metrics.rto_count} RTOs, "
        f"{metrics.legit_drops} legit drops, {metrics.injections_total} injections"
    )


def _load_or_exit(path: str) -> ScenarioConfig:
    try:
        return ScenarioService.load_scenario(path)
    except ScenarioParseError as e:
        for diagnostic in e.diagnostics:
            click.echo(f"{path}: {diagnostic}", err=True)
        sys.exit(EXIT_USAGE)
    except OSError as e:
        click.echo(f"cannot read {path}: {e}", err=True)
        sys.exit(EXIT_USAGE)


def _run_or_exit(cfg: ScenarioConfig, trace_level: Optional[str],
                 audit_path: Optional[str] = None) -> RunMetrics:
    try:
        return SimulationService.run_scenario(cfg, trace_level, audit_path)
    except SimulationError as e:
        logger.error(f"Simulation of '{cfg.name}' failed: {e}")
        click.echo(f"simulation failed: {e}", err=True)
        sys.exit(EXIT_FAILED)
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_USAGE)
    except OSError as e:
        click.echo(f"cannot write audit trail: {e}", err=True)
        sys.exit(EXIT_USAGE)


def _baseline_for(cfg: ScenarioConfig, scenario_path: str,
                  trace_level: Optional[str]) -> Optional[RunMetrics]:
    """Run the scenario's baseline, looked up as <baseline_scenario>.scn next to it."""
    if cfg.baseline_scenario is None:
        return None
    path = Path(scenario_path).parent / f"{cfg.baseline_scenario}.scn"
    if not path.exists():
        logger.warning(f"Baseline scenario {path} not found")
        return None
    return _run_or_exit(_load_or_exit(str(path)), trace_level)


@click.group()
@click.version_option(__version__, prog_name='stealthsim')
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              default=None, help='Console log level (default from STEALTHSIM_LOG_LEVEL).')
def cli(log_level: Optional[str]):
    """Stealth man-in-the-middle attacks on TCP over an IPsec tunnel."""
    if log_level:
        Config.LOG_LEVEL = log_level.upper()
    setup_logger('app')


@cli.command()
@click.argument('scenario', type=click.Path(dir_okay=False))
@click.option('--trace', 'trace_path', type=click.Path(dir_okay=False), help='Write the cwnd trace csv here.')
@click.option('--summary', 'summary_path', type=click.Path(dir_okay=False), help='Write the json summary here.')
@click.option('--audit', 'audit_path', type=click.Path(dir_okay=False), help='Write the run audit trail json here.')
@click.option('--trace-level', type=click.Choice(TRACE_LEVELS), default=None,
              help='Trace retention (default from STEALTHSIM_TRACE_LEVEL).')
def run(scenario: str, trace_path: Optional[str], summary_path: Optional[str], audit_path: Optional[str],
        trace_level: Optional[str]):
    """Run one scenario and compare it with the model."""
    cfg = _load_or_exit(scenario)
    metrics = _run_or_exit(cfg, trace_level, audit_path)
    baseline = _baseline_for(cfg, scenario, trace_level)

    params = ComparisonService.attack_params_for(cfg, metrics)
    report = ComparisonService.compare_with_model(metrics, params, cfg.tolerance, cfg=cfg, baseline=baseline)

    if trace_path:
        ImportExportService.write_trace(metrics, trace_path)
    if summary_path:
        ImportExportService.write_summary(metrics, summary_path, report)

    _echo_headline(metrics)
    _echo_report(report)
    sys.exit(EXIT_OK if report.passed else EXIT_FAILED)


@cli.command()
@click.option('--T', 'T', type=DURATION, default=None, help='Attack epoch period, e.g. 500ms.')
@click.option('--rtt', type=DURATION, default=None, help='Round-trip time, e.g. 100ms.')
@click.option('--cwnd0', type=float, default=None, help='Window at the first epoch (MSS).')
@click.option('--W', 'W', type=int, default=None, help='Anti-replay window width.')
@click.option('--R', 'R', type=RATE, default=None, help='Transmission rate, e.g. 10MBps.')
@click.option('--dprop', type=DURATION, default=None, help='Propagation delay, e.g. 1s.')
@click.option('--L', 'L', type=SIZE, default=None, help='Packet size, e.g. 1000B.')
@click.option('--mss', type=SIZE, default='1000B', show_default=True, help='Segment size for throughput.')
def predict(T, rtt, cwnd0, W, R, dprop, L, mss):
    """Evaluate the closed-form predictions for the given parameters."""
    lines = []
    try:
        if T is not None and rtt is not None:
            lines.append(f"steady_state_cwnd_max: {AnalyticsService.steady_state_cwnd_max(T, rtt):g} MSS "
                         f"(stated form {AnalyticsService.steady_state_cwnd_max(T, rtt, MODE_STATED):g})")
            lines.append(f"steady_state_cwnd_avg: {AnalyticsService.steady_state_cwnd_avg(T, rtt, MODE_DERIVED):g} MSS "
                         f"(prose reading {AnalyticsService.steady_state_cwnd_avg(T, rtt, MODE_PROSE):g})")
            lines.append(f"steady_state_throughput: {AnalyticsService.steady_state_throughput(T, rtt, mss):.6g} B/s")
            lines.append(f"epoch_period: {format_duration(T)}")
            if cwnd0 is not None:
                try:
                    epochs = AnalyticsService.epochs_to_steady_state(cwnd0, T, rtt)
                    lines.append(f"epochs_to_steady_state: {epochs}")
                except ValueError as e:
                    lines.append(f"epochs_to_steady_state: untestable ({e})")
        if cwnd0 is not None and W is not None:
            lines.append(f"rto_feasible: {str(AnalyticsService.rto_feasible(cwnd0, W)).lower()}")
        if R is not None and dprop is not None and L is not None:
            lines.append(f"required_window_size: {AnalyticsService.required_window_size(R, dprop, L)} packets")
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_USAGE)

    if not lines:
        click.echo("error: give --T and --rtt, --cwnd0 and --W, or --R, --dprop and --L", err=True)
        sys.exit(EXIT_USAGE)
    for line in lines:
        click.echo(line)


@cli.command()
@click.argument('summary', type=click.Path(exists=True, dir_okay=False))
@click.argument('scenario', type=click.Path(dir_okay=False))
@click.option('--baseline', 'baseline_path', type=click.Path(exists=True, dir_okay=False),
              help='Summary json of the unattacked baseline run.')
@click.option('--tolerance', type=float, default=None, help='Override the scenario tolerance.')
def compare(summary: str, scenario: str, baseline_path: Optional[str], tolerance: Optional[float]):
    """Compare a stored run summary with the model."""
    cfg = _load_or_exit(scenario)
    try:
        metrics, _ = ImportExportService.load_summary(summary)
        baseline = ImportExportService.load_summary(baseline_path)[0] if baseline_path else None
    except ValueError as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_USAGE)

    params = ComparisonService.attack_params_for(cfg, metrics)
    report = ComparisonService.compare_with_model(
        metrics, params, tolerance if tolerance is not None else cfg.tolerance, cfg=cfg, baseline=baseline
    )
    _echo_report(report)
    sys.exit(EXIT_OK if report.passed else EXIT_FAILED)


@cli.command()
@click.argument('directory', type=click.Path(file_okay=False), default=None, required=False)
@click.option('--jobs', type=int, default=None, help='Worker processes (default STEALTHSIM_SUITE_JOBS).')
@click.option('--check-determinism', is_flag=True, help='Run each scenario twice and compare outputs.')
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), help='Write the acceptance table csv here.')
@click.option('--trace-level', type=click.Choice(TRACE_LEVELS), default=None)
def suite(directory: Optional[str], jobs: Optional[int], check_determinism: bool,
          out_path: Optional[str], trace_level: Optional[str]):
    """Run every scenario in DIRECTORY (default data/scenarios) and print the acceptance table."""
    directory = directory or Config.SCENARIO_DIR
    try:
        outcome = SuiteService.run_suite(directory, jobs, check_determinism, trace_level)
    except (FileNotFoundError, ValueError) as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_USAGE)
    except SimulationError as e:
        click.echo(f"simulation failed: {e}", err=True)
        sys.exit(EXIT_FAILED)

    if outcome.table.empty:
        click.echo(f"no scenarios in {directory}")
    else:
        click.echo(outcome.table.to_string(index=False))
    for name, report in outcome.reports.items():
        for row in report.rows:
            if row.status == STATUS_FAIL:
                click.echo(f"{name}: {row.claim} failed ({row.note})", err=True)
    if out_path:
        outcome.table.to_csv(out_path, index=False, lineterminator='\n')
        logger.info(f"Wrote acceptance table to {out_path}")
    sys.exit(EXIT_OK if outcome.passed else EXIT_FAILED)


def main():
    cli()


if __name__ == '__main__':
    main()
