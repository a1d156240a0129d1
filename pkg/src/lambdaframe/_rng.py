"""Stateless, order-independent pseudo-random draws keyed by their context."""

from __future__ import annotations

import hashlib


def unit(seed: int, *parts: object) -> float:
    """Uniform float in [0, 1) determined only by ``seed`` and ``parts``."""
    h = hashlib.blake2b(repr((seed,) + parts).encode(), digest_size=8).digest()
    return (int.from_bytes(h, "little") >> 11) * (1.0 / (1 << 53))


def symmetric(seed: int, *parts: object) -> float:
    """Uniform float in [-1, 1)."""
    return 2.0 * unit(seed, *parts) - 1.0
