"""
Suite Service: runs every scenario of a directory, resolves baselines,
compares each run with the model and builds the acceptance table.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from app.config import Config
from app.constants import STATUS_FAIL, STATUS_PASS, STATUS_UNTESTABLE
from app.models.metrics import RunMetrics
from app.models.report import ComparisonReport
from app.models.scenario import ScenarioConfig
from app.services.comparison_service import ComparisonService
from app.services.import_export import ImportExportService
from app.services.scenario_service import ScenarioService
from app.services.simulation_service import SimulationService

logger = logging.getLogger(__name__)

SCENARIO_GLOB = '*.scn'
TABLE_COLUMNS = ['scenario', 'strategy', 'rttp', 'status', 'pass', 'fail', 'untestable',
                 'deterministic', 'failed_claims']


def _run_path(path: str, trace_level: Optional[str],
              check_determinism: bool) -> Tuple[ScenarioConfig, RunMetrics, Optional[bool]]:
    """Worker entry point; module level so it pickles into a process pool."""
    cfg = ScenarioService.load_scenario(path)
    metrics = SimulationService.run_scenario(cfg, trace_level)
    if not check_determinism:
        return cfg, metrics, None
    again = SimulationService.run_scenario(cfg, trace_level)
    identical = all(
        ImportExportService.emit_trace(metrics, fmt) == ImportExportService.emit_trace(again, fmt)
        for fmt in ('csv', 'json')
    )
    if not identical:
        logger.error(f"Scenario '{cfg.name}' is not deterministic")
    return cfg, metrics, identical


@dataclass
class SuiteOutcome:
    table: pd.DataFrame
    reports: Dict[str, ComparisonReport] = field(default_factory=dict)
    metrics: Dict[str, RunMetrics] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.table.empty:
            return True
        return bool((self.table['status'] == STATUS_PASS).all())


class SuiteService:
    """Service for batch runs over a scenario directory."""

    @staticmethod
    def discover(directory: str) -> List[Path]:
        root = Path(directory)
        if not root.is_dir():
            raise FileNotFoundError(f"scenario directory {directory} does not exist")
        return sorted(root.glob(SCENARIO_GLOB))

    @staticmethod
    def run_suite(directory: str, jobs: Optional[int] = None, check_determinism: bool = False,
                  trace_level: Optional[str] = None) -> SuiteOutcome:
        """
        Run all scenarios of a directory.

        Args:
            directory: Folder holding *.scn files
            jobs: Worker processes; defaults to Config.SUITE_JOBS, 1 runs in-process
            check_determinism: Run each scenario twice and compare csv/json bytes
            trace_level: Trace retention for every run

        Returns:
            SuiteOutcome: acceptance table plus per-scenario reports and metrics
        """
        paths = [str(p) for p in SuiteService.discover(directory)]
        jobs = jobs or Config.SUITE_JOBS
        logger.info(f"Running {len(paths)} scenarios from {directory} with {jobs} worker(s)")

        if jobs > 1 and len(paths) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(
                    _run_path, paths, [trace_level] * len(paths), [check_determinism] * len(paths)
                ))
        else:
            results = [_run_path(p, trace_level, check_determinism) for p in paths]

        configs = {cfg.name: cfg for cfg, _, _ in results}
        metrics = {cfg.name: m for cfg, m, _ in results}
        determinism = {cfg.name: d for cfg, _, d in results}
        if len(configs) != len(results):
            raise ValueError(f"scenario names in {directory} are not unique")

        reports = {}
        for name, cfg in configs.items():
            baseline = None
            if cfg.baseline_scenario is not None:
                baseline = metrics.get(cfg.baseline_scenario)
                if baseline is None:
                    logger.warning(f"{name}: baseline '{cfg.baseline_scenario}' not in suite")
            params = ComparisonService.attack_params_for(cfg, metrics[name])
            reports[name] = ComparisonService.compare_with_model(
                metrics[name], params, cfg.tolerance, cfg=cfg, baseline=baseline
            )

        table = SuiteService.acceptance_table(reports, metrics, determinism)
        outcome = SuiteOutcome(table=table, reports=reports, metrics=metrics)
        passed = int((table['status'] == STATUS_PASS).sum())
        logger.info(f"Suite finished: {passed}/{len(table)} scenarios passed")
        return outcome

    @staticmethod
    def acceptance_table(reports: Dict[str, ComparisonReport], metrics: Dict[str, RunMetrics],
                         determinism: Dict[str, Optional[bool]]) -> pd.DataFrame:
        """One row per scenario; a scenario fails on any failed claim or a determinism mismatch."""
        rows = []
        for name in sorted(reports):
            report = reports[name]
            statuses = [row.status for row in report.rows]
            deterministic = determinism.get(name)
            failed = [row.claim for row in report.rows if row.status == STATUS_FAIL]
            ok = report.passed and deterministic is not False
            rows.append({
                'scenario': name,
                'strategy': report.strategy,
                'rttp': metrics[name].rttp,
                'status': STATUS_PASS if ok else STATUS_FAIL,
                'pass': statuses.count(STATUS_PASS),
                'fail': statuses.count(STATUS_FAIL),
                'untestable': statuses.count(STATUS_UNTESTABLE),
                'deterministic': '' if deterministic is None else ('yes' if deterministic else 'no'),
                'failed_claims': ' '.join(failed),
            })
        return pd.DataFrame(rows, columns=TABLE_COLUMNS)
