"""
Run monitoring for the Pearcey lab solvers.
Counts expensive evaluations and records wall-clock timings per stage.
"""

import time
import threading
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from collections import deque
from typing import Dict, List

logger = logging.getLogger(__name__)


@dataclass
class StageTiming:
    """Wall-clock duration of one named stage."""
    label: str
    elapsed_ms: float
    timestamp: float


class RunMonitor:
    """
    Thread-safe counters and stage timings shared by solver calls.
    """

    def __init__(self, history: int = 256):
        self.counters: Dict[str, int] = {}
        self.timings: deque = deque(maxlen=history)
        self._lock = threading.RLock()

    def count(self, name: str, amount: int = 1):
        """
        Increment a named counter.

        Args:
            name: Counter name, e.g. 'determinants'
            amount: Increment
        """
        with self._lock:
            self.counters[name] = self.counters.get(name, 0) + amount

    @contextmanager
    def timed(self, label: str):
        """Record the wall-clock time spent inside the block."""
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = (time.perf_counter() - start) * 1000.0
            with self._lock:
                self.timings.append(StageTiming(label, elapsed, time.time()))
            logger.debug(f"{label} took {elapsed:.1f} ms")

    def reset(self):
        with self._lock:
            self.counters.clear()
            self.timings.clear()

    def recent_timings(self, limit: int = 10) -> List[StageTiming]:
        with self._lock:
            return list(self.timings)[-limit:]

    def get_run_summary(self) -> Dict:
        """
        Snapshot of counters and total time per stage label.

        Returns:
            dict: counters plus 'timing_ms' keyed by stage label
        """
        with self._lock:
            totals: Dict[str, float] = {}
            for timing in self.timings:
                totals[timing.label] = totals.get(timing.label, 0.0) + timing.elapsed_ms
            return {'counters': dict(self.counters), 'timing_ms': totals}


MONITOR = RunMonitor()
