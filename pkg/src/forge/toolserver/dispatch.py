"""Fast-lane dispatch: a token bucket over paid low-latency services."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable

FAST = "fast"
STANDARD = "standard"


@dataclass(frozen=True)
class DispatchDecision:
    lane: str
    reason: str


class FastLaneDispatcher:
    """Routes a request to the fast lane while it has tokens and is under its share.

    Tokens refill at ``capacity`` per second up to ``burst``. The fast lane is
    also held at or below ``target_share`` of all requests seen, so the
    long-run fast share is ``min(target_share, capacity / load)``. Requests the
    fast lane cannot take go to the standard lane; nothing is dropped.
    """

    def __init__(self, capacity: float, target_share: float = 0.15, burst: float | None = None,
                 clock: Callable[[], float] = time.monotonic):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        if not 0.0 <= target_share <= 1.0:
            raise ValueError("target_share must lie in [0, 1]")
        self.capacity = float(capacity)
        self.target_share = target_share
        self.burst = float(burst) if burst is not None else max(1.0, self.capacity)
        self._clock = clock
        self._tokens = self.burst if self.capacity > 0 else 0.0
        self._last: float | None = None
        self._lock = threading.Lock()
        self.total = 0
        self.fast = 0

    def _refill(self, now: float) -> None:
        if self._last is not None and now > self._last:
            self._tokens = min(self.burst, self._tokens + (now - self._last) * self.capacity)
        if self._last is None or now > self._last:
            self._last = now

    def dispatch(self, now: float | None = None) -> DispatchDecision:
        with self._lock:
            self.total += 1
            if self.capacity <= 0:
                return DispatchDecision(STANDARD, "fast lane disabled")
            self._refill(self._clock() if now is None else now)
            if self.fast >= self.target_share * self.total:
                return DispatchDecision(STANDARD, "fast lane at target share")
            if self._tokens < 1.0:
                return DispatchDecision(STANDARD, "fast lane out of tokens")
            self._tokens -= 1.0
            self.fast += 1
            return DispatchDecision(FAST, "fast lane token available")

    @property
    def fast_share(self) -> float:
        return self.fast / self.total if self.total else 0.0
