from __future__ import annotations

import math


class TokenBucket:
    """Admission bucket refilled in whole ticks aligned to time 0.

    At every tick ``k * interval`` the bucket gains ``rate * interval`` tokens,
    capped at ``capacity``. Admissions are reserved in request order, so a caller
    gets the earliest time >= its request time (and >= every earlier reservation)
    at which a token is available. Times are integer microseconds.
    """

    def __init__(self, rate: float, capacity: int, interval_us: int = 1_000_000):
        if rate <= 0 or capacity < 1 or interval_us <= 0:
            raise ValueError("rate, capacity and interval must be positive")
        self.rate = rate
        self.capacity = capacity
        self.interval_us = interval_us
        self.tokens = float(capacity)
        self.tick = 0  # index of the last applied tick
        self.last_admission = 0

    def _advance(self, t: int) -> None:
        k = t // self.interval_us
        if k > self.tick:
            refill = (k - self.tick) * self.rate * self.interval_us / 1e6
            self.tokens = min(float(self.capacity), self.tokens + refill)
            self.tick = k

    def reserve(self, now_us: int) -> int:
        t = max(now_us, self.last_admission)
        self._advance(t)
        while self.tokens < 1.0:
            t = (self.tick + 1) * self.interval_us
            self._advance(t)
        self.tokens -= 1.0
        self.last_admission = t
        return t


def admission_spread_s(n: int, rate: float, burst: int, interval_s: float = 1.0) -> float:
    """Closed-form first-to-last admission spread for ``n`` simultaneous requests at a tick,
    when ``rate * interval == burst``."""
    if n <= 0:
        return 0.0
    return (math.ceil(n / burst) - 1) * interval_s
