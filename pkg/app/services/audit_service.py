"""
Audit Service for recording what happened during a run and checking it
afterwards: adversary strikes and injections, skipped epochs, anti-replay
drops, RTTP overflows.
"""
import json
import logging
import os
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple, Union

import numpy as np

from app.models.packets import Injection

logger = logging.getLogger(__name__)


class AuditService:
    """Service for run audit trails and the post-hoc checks run on them."""

    # Event type constants
    EVENT_TYPES = {
        'RUN_STARTED': 'Run Started',
        'RUN_FINISHED': 'Run Finished',
        'STRIKE': 'Attack Strike',
        'INJECTION': 'Injection',
        'EPOCH_SKIPPED': 'Epoch Skipped',
        'ANTIREPLAY_DROP': 'Anti-Replay Drop',
        'SCRIPTED_DROP': 'Scripted Drop',
        'RTTP_OVERFLOW': 'RTTP Overflow',
    }

    @staticmethod
    def check_budget_soundness(times: Iterable[int], rho: Union[Fraction, float],
                               sigma: int) -> bool:
        """
        Confirm that every window [t_i, t_j] of the injection log holds at
        most rho * (t_j - t_i) + sigma injections.

        With g_k = k - rho * t_k over the sorted log, the window [i, j]
        holds j - i + 1 injections, so the bound is g_j - min(g_0..g_j) + 1 <= sigma.

        Args:
            times: Injection times in microseconds
            rho: Packets per second
            sigma: Burst size

        Returns:
            bool: True when no window exceeds the budget
        """
        t = np.sort(np.asarray(list(times), dtype=np.float64))
        if t.size == 0:
            return True
        g = np.arange(t.size, dtype=np.float64) - float(rho) * t / 1e6
        excess = g - np.minimum.accumulate(g) + 1
        return bool(np.all(excess <= sigma + 1e-9))


class RunAuditLog:
    """In-memory audit trail of one run."""

    def __init__(self, scenario: str):
        self.scenario = scenario
        self.entries: List[Dict[str, Any]] = []
        self.injection_times: List[int] = []
        self._observed: Set[Tuple[str, int]] = set()
        self._unproven = 0

    def log_event(self, event_type: str, time_us: int, **details: Any) -> None:
        if event_type not in AuditService.EVENT_TYPES:
            raise ValueError(f"unknown audit event type '{event_type}'")
        self.entries.append({
            'time_us': time_us,
            'event_type': AuditService.EVENT_TYPES[event_type],
            'details': details,
        })

    def note_observed(self, sa_id: str, esp_seq: int) -> None:
        self._observed.add((sa_id, esp_seq))

    def record_injection(self, injection: Injection, now: int) -> None:
        """Log an injection and check it copies a packet seen on the wire."""
        pkt = injection.packet
        if (pkt.sa_id, pkt.esp_seq) not in self._observed:
            self._unproven += 1
            logger.error(f"Injection of unobserved packet {pkt.sa_id}#{pkt.esp_seq}")
        self.injection_times.append(now)
        self.log_event(
            'INJECTION', now,
            strike_id=injection.strike_id,
            epoch_index=injection.epoch_index,
            follow_up=injection.follow_up,
            sa_id=pkt.sa_id,
            esp_seq=pkt.esp_seq,
            observed_at=injection.observed_at,
            deliver_at=injection.deliver_at,
            toward=injection.toward,
        )

    @property
    def provenance_ok(self) -> bool:
        return self._unproven == 0

    def events(self, event_type: Optional[str] = None) -> List[Dict[str, Any]]:
        if event_type is None:
            return list(self.entries)
        label = AuditService.EVENT_TYPES[event_type]
        return [entry for entry in self.entries if entry['event_type'] == label]

    def save(self, path: str) -> None:
        try:
            os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
            with open(path, 'w') as f:
                json.dump({'scenario': self.scenario, 'entries': self.entries}, f, indent=2)
            logger.info(f"Saved audit trail with {len(self.entries)} entries to {path}")
        except OSError as e:
            logger.error(f"Error saving audit trail to {path}: {e}")
            raise
