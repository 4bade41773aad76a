"""Injected time sources. Production uses the wall clock; tests use a monotone counter."""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int:
        """Current Unix time in whole seconds."""
        ...


class WallClock:
    def now(self) -> int:
        return int(time.time())


class CounterClock:
    """Deterministic clock: starts at `start`, advances by `step` per call."""

    def __init__(self, start: int = 1_760_000_000, step: int = 1):
        self._next = start
        self._step = step

    def now(self) -> int:
        value = self._next
        self._next += self._step
        return value

    def peek(self) -> int:
        return self._next

    def advance(self, seconds: int) -> None:
        self._next += seconds
