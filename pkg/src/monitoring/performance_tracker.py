import time
from contextlib import contextmanager
from typing import Dict, Iterator


class PerformanceTracker:
    """Wall-clock timing of named phases, reported in seconds to 3 decimals"""

    def __init__(self) -> None:
        self.timings: Dict[str, float] = {}

    @contextmanager
    def track(self, phase: str) -> Iterator[None]:
        """Time a phase; repeated phases accumulate"""
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[phase] = self.timings.get(phase, 0.0) + elapsed

    def seconds(self, phase: str) -> float:
        return round(self.timings.get(phase, 0.0), 3)

    def report(self) -> Dict[str, float]:
        return {phase: round(value, 3) for phase, value in self.timings.items()}
