"""
Service for exporting run results (cwnd trace csv, json summary) and
reading summaries back for `compare`.
"""
import json
import logging
import os
from typing import Literal, Optional, Tuple

import pandas as pd
from pydantic import ValidationError

from app.models.metrics import TRACE_COLUMNS, RunMetrics
from app.models.report import ComparisonReport

logger = logging.getLogger(__name__)

Format = Literal['csv', 'json']


class ImportExportService:
    """Service for trace and summary import/export."""

    @staticmethod
    def trace_frame(metrics: RunMetrics) -> pd.DataFrame:
        """The cwnd trace as a DataFrame with TRACE_COLUMNS, plot ready."""
        return pd.DataFrame(
            [tuple(row) for row in metrics.trace], columns=TRACE_COLUMNS
        ).astype({'time_us': 'int64', 'cwnd_mss_fixedpoint': 'int64'})

    @staticmethod
    def emit_trace(metrics: RunMetrics, fmt: Format = 'csv',
                   report: Optional[ComparisonReport] = None) -> str:
        """
        Render a run as file content.

        Args:
            metrics: Run to render
            fmt: 'csv' for the cwnd trace, 'json' for the summary
            report: Comparison report to embed in the json summary

        Returns:
            str: byte-identical for identical runs
        """
        if fmt == 'csv':
            return ImportExportService.trace_frame(metrics).to_csv(index=False, lineterminator='\n')
        if fmt == 'json':
            document = {
                'metrics': metrics.summary(),
                'comparison': report.model_dump(mode='json') if report is not None else None,
            }
            return json.dumps(document, indent=2, ensure_ascii=False) + '\n'
        raise ValueError(f"unknown format '{fmt}' (expected csv or json)")

    @staticmethod
    def _write(path: str, content: str) -> None:
        try:
            os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(content)
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise

    @staticmethod
    def write_trace(metrics: RunMetrics, path: str) -> None:
        ImportExportService._write(path, ImportExportService.emit_trace(metrics, 'csv'))
        logger.info(f"Wrote {len(metrics.trace)} trace rows to {path}")

    @staticmethod
    def write_summary(metrics: RunMetrics, path: str,
                      report: Optional[ComparisonReport] = None) -> None:
        ImportExportService._write(path, ImportExportService.emit_trace(metrics, 'json', report))
        logger.info(f"Wrote summary of '{metrics.scenario}' to {path}")

    @staticmethod
    def load_summary(path: str) -> Tuple[RunMetrics, Optional[ComparisonReport]]:
        """
        Read a json summary written by write_summary.

        Raises:
            ValueError: if the file is not a valid summary
        """
        try:
            with open(path, 'r', encoding='utf-8') as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path} is not valid json: {e}") from e

        if not isinstance(document, dict) or 'metrics' not in document:
            raise ValueError(f"{path} has no 'metrics' section")
        try:
            metrics = RunMetrics.model_validate(document['metrics'])
            report = None
            if document.get('comparison') is not None:
                report = ComparisonReport.model_validate(document['comparison'])
        except ValidationError as e:
            raise ValueError(f"{path} is not a run summary: {e}") from e
        return metrics, report
