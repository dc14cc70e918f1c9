"""Injectable clocks: wall time in production, manual time in tests.

Game sessions and the live-classification throttle take a ``Clock`` so their
timing behaviour is testable without real delays.
"""

from __future__ import annotations

import time


class Clock:
    def now(self) -> float:
        raise NotImplementedError


class WallClock(Clock):
    def now(self) -> float:
        return time.monotonic()


class ManualClock(Clock):
    """A clock that only moves when told to."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("clock cannot move backwards")
        self._now += float(seconds)
        return self._now
