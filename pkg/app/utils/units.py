"""
Unit utilities for scenario values written with suffixes (ms, MBps, B, ...).
"""
import re
from fractions import Fraction

from app.constants import DURATION_UNITS, RATE_UNITS, SIZE_UNITS, US_PER_SECOND

_QUANTITY_RE = re.compile(r'^\s*([0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)\s*([A-Za-z/]*)\s*$')


def _split_quantity(text: str) -> tuple[Fraction, str]:
    match = _QUANTITY_RE.match(text)
    if not match:
        raise ValueError(f"not a quantity: '{text}'")
    return Fraction(match.group(1)), match.group(2)


def parse_duration(text: str) -> int:
    """
    Convert a duration like '100ms', '1.5s' or '250us' to integer microseconds.

    Examples:
        '100ms' -> 100000
        '1s' -> 1000000
        '40us' -> 40
    """
    value, unit = _split_quantity(text)
    if not unit:
        raise ValueError(f"duration '{text}' needs a unit (us, ms, s)")
    if unit not in DURATION_UNITS:
        raise ValueError(f"unknown duration unit '{unit}' (expected us, ms or s)")
    micros = value * DURATION_UNITS[unit]
    if micros.denominator != 1:
        raise ValueError(f"duration '{text}' is finer than one microsecond")
    return int(micros)


def parse_size(text: str) -> int:
    """
    Convert a size like '1000B' or '1.5KB' to bytes. A bare number means bytes.
    """
    value, unit = _split_quantity(text)
    unit = unit or 'B'
    if unit not in SIZE_UNITS:
        raise ValueError(f"unknown size unit '{unit}' (expected B, KB or MB)")
    size = value * SIZE_UNITS[unit]
    if size.denominator != 1:
        raise ValueError(f"size '{text}' is not a whole number of bytes")
    return int(size)


def parse_rate(text: str) -> int:
    """
    Convert a transmission rate like '10MBps' to bytes per second.
    """
    value, unit = _split_quantity(text)
    unit = unit or 'Bps'
    if unit not in RATE_UNITS:
        raise ValueError(f"unknown rate unit '{unit}' (expected Bps, KBps, MBps or GBps)")
    rate = value * RATE_UNITS[unit]
    if rate.denominator != 1:
        raise ValueError(f"rate '{text}' is not a whole number of bytes per second")
    return int(rate)


def parse_frequency(text: str) -> float:
    """
    Convert an event rate like '30/s', '0.3' or '300/ms' to events per second.
    """
    text = text.strip()
    per = '/s'
    for suffix in ('/us', '/ms', '/s'):
        if text.endswith(suffix):
            per = suffix
            text = text[: -len(suffix)]
            break
    value, unit = _split_quantity(text)
    if unit:
        raise ValueError(f"unexpected unit '{unit}' in rate (use e.g. 30/s)")
    scale = Fraction(US_PER_SECOND, DURATION_UNITS[per[1:]])
    return float(value * scale)


def format_duration(micros: int) -> str:
    """Render microseconds with the largest unit that keeps the value whole."""
    if micros and micros % US_PER_SECOND == 0:
        return f"{micros // US_PER_SECOND}s"
    if micros and micros % 1_000 == 0:
        return f"{micros // 1_000}ms"
    return f"{micros}us"
