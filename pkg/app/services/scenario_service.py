"""
Scenario Service for reading flat `key = value` scenario files into
validated ScenarioConfig models.

    # comment
    name = ack_dup_T1
    rtt = 100ms
    rate = 10MBps
    anti_replay_window = 0          # or 'auto'
    scripted_drops = 120, 480
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from pydantic import ValidationError

from app.models.scenario import ScenarioConfig
from app.services.analytics import AnalyticsService
from app.utils.units import parse_duration, parse_frequency, parse_rate, parse_size

logger = logging.getLogger(__name__)

AUTO = 'auto'


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got '{text}'")


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got '{text}'")


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ('true', 'yes', 'on', '1'):
        return True
    if lowered in ('false', 'no', 'off', '0'):
        return False
    raise ValueError(f"expected true or false, got '{text}'")


def _parse_int_list(text: str) -> List[int]:
    return [_parse_int(item.strip()) for item in text.split(',') if item.strip()]


def _parse_window(text: str) -> Union[int, str]:
    if text.lower() == AUTO:
        return AUTO
    return _parse_int(text)


# key -> converter from the raw text value
KEY_PARSERS: Dict[str, Callable[[str], Any]] = {
    'name': str,
    'rtt': parse_duration,
    'lan_delay': parse_duration,
    'rate': parse_rate,
    'mss': parse_size,
    'ack_size': parse_size,
    'duration': parse_duration,
    'transfer_segments': _parse_int,
    'anti_replay_window': _parse_window,
    'sa_policy': str,
    'cross_traffic_rate': parse_frequency,
    'tcp_initial_cwnd': _parse_int,
    'tcp_initial_ssthresh': _parse_int,
    'tcp_receiver_window': _parse_int,
    'tcp_rto': parse_duration,
    'adversary': str,
    'adversary_rho': parse_frequency,
    'adversary_sigma': _parse_int,
    'adversary_period': parse_duration,
    'adversary_speedup': parse_duration,
    'adversary_direction': str,
    'adversary_observability': str,
    'adversary_copies': _parse_int,
    'adversary_start': parse_duration,
    'adversary_tap': _parse_float,
    'adversary_stale': _parse_bool,
    'adversary_memory': _parse_int,
    'rttp': str,
    'rttp_guard': _parse_float,
    'rttp_alpha': _parse_float,
    'rttp_capacity': _parse_int,
    'scripted_drops': _parse_int_list,
    'seed': _parse_int,
    'tolerance': _parse_float,
    'baseline_scenario': str,
    'expect_fast_retransmits_min': _parse_int,
    'expect_fast_retransmits_max': _parse_int,
    'expect_legit_drops_min': _parse_int,
    'expect_legit_drops_max': _parse_int,
    'expect_rto_min': _parse_int,
    'expect_rto_max': _parse_int,
    'expect_throughput_ratio_min': _parse_float,
    'expect_throughput_ratio_max': _parse_float,
}


@dataclass(frozen=True)
class ScenarioDiagnostic:
    line: Optional[int]
    key: Optional[str]
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line is not None else "scenario"
        if self.key:
            return f"{where}: {self.key}: {self.message}"
        return f"{where}: {self.message}"


class ScenarioParseError(ValueError):
    """Raised with every diagnostic found in a scenario text."""

    def __init__(self, diagnostics: List[ScenarioDiagnostic], source: Optional[str] = None):
        self.diagnostics = diagnostics
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(prefix + "; ".join(str(d) for d in diagnostics))


class ScenarioService:
    """Service for scenario parsing and loading."""

    @staticmethod
    def parse_scenario(text: str, source: Optional[str] = None) -> ScenarioConfig:
        """
        Parse scenario text into a validated ScenarioConfig.

        Args:
            text: Scenario file content
            source: File name used in diagnostics and as the default scenario name

        Returns:
            ScenarioConfig: with defaults applied for every key not given

        Raises:
            ScenarioParseError: listing every problem with its key and line
        """
        values: Dict[str, Any] = {}
        lines: Dict[str, int] = {}
        diagnostics: List[ScenarioDiagnostic] = []

        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                diagnostics.append(ScenarioDiagnostic(number, None, f"expected 'key = value', got '{line}'"))
                continue
            key, value = (part.strip() for part in line.split('=', 1))
            if key not in KEY_PARSERS:
                diagnostics.append(ScenarioDiagnostic(number, key, "unknown key"))
                continue
            if key in lines:
                diagnostics.append(ScenarioDiagnostic(number, key, f"duplicate key (first set on line {lines[key]})"))
                continue
            lines[key] = number
            try:
                values[key] = KEY_PARSERS[key](value)
            except ValueError as e:
                diagnostics.append(ScenarioDiagnostic(number, key, str(e)))

        if values.get('anti_replay_window') == AUTO:
            values['anti_replay_window'] = ScenarioService._auto_window(values)

        if diagnostics:
            raise ScenarioParseError(diagnostics, source)

        if 'name' not in values and source:
            values['name'] = Path(source).stem

        try:
            return ScenarioConfig(**values)
        except ValidationError as e:
            raise ScenarioParseError(ScenarioService._diagnostics_from(e, lines), source) from e

    @staticmethod
    def _auto_window(values: Dict[str, Any]) -> int:
        """Window sized to the packets in transit over one propagation delay."""
        fields = ScenarioConfig.model_fields
        rate = values.get('rate', fields['rate'].default)
        rtt = values.get('rtt', fields['rtt'].default)
        mss = values.get('mss', fields['mss'].default)
        return AnalyticsService.required_window_size(rate, rtt // 2, mss)

    @staticmethod
    def _diagnostics_from(error: ValidationError, lines: Dict[str, int]) -> List[ScenarioDiagnostic]:
        diagnostics = []
        for err in error.errors():
            message = err['msg'].removeprefix('Value error, ')
            key = str(err['loc'][0]) if err['loc'] else None
            if key is None and ': ' in message:
                candidate, rest = message.split(': ', 1)
                if candidate in KEY_PARSERS:
                    key, message = candidate, rest
            diagnostics.append(ScenarioDiagnostic(lines.get(key), key, message))
        return diagnostics

    @staticmethod
    def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
        """Read and parse a scenario file."""
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            logger.error(f"Error reading scenario {path}: {e}")
            raise
        cfg = ScenarioService.parse_scenario(text, source=str(path))
        logger.debug(f"Loaded scenario '{cfg.name}' from {path}")
        return cfg
