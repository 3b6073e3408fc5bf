"""Injectable monotonic clock, millisecond resolution.

Debounce and sweep logic is interval-based, so everything runs on
monotonic milliseconds rather than wall-clock time. Test builds inject a
manually advanced clock to get fully deterministic behavior.
"""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int:
        """Current time in monotonic milliseconds; never decreases."""
        ...


class MonotonicClock:
    """Wall clock for production use, backed by ``time.monotonic_ns``."""

    def now(self) -> int:
        return time.monotonic_ns() // 1_000_000


class ManualClock:
    """Manually advanced clock for tests and deterministic replays."""

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now += delta_ms
        return self._now

    def advance_to(self, at_ms: int) -> int:
        if at_ms < self._now:
            raise ValueError(f"clock cannot move backwards ({self._now} -> {at_ms})")
        self._now = at_ms
        return self._now
