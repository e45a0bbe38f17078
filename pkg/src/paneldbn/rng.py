"""Deterministic seed derivation for reproducible parallel work.

Every worker (bootstrap replicate, sampled county, masked series) draws from
its own generator seeded by mixing a master seed with integer indices, so
results never depend on scheduling or thread count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *parts: int) -> int:
    """Mix a master seed with integer parts into an independent 64-bit seed."""
    out = _splitmix64(int(master_seed) & _MASK64)
    for part in parts:
        out = _splitmix64(out ^ (int(part) & _MASK64))
    return out


def derived_rng(master_seed: int, *parts: int) -> np.random.Generator:
    """A numpy Generator seeded from ``derive_seed(master_seed, *parts)``."""
    return np.random.default_rng(derive_seed(master_seed, *parts))
