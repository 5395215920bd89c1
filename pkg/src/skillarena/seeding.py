"""Deterministic derivation of independent random streams.

Every stream in a run is keyed by a tuple of integers (master seed, stage,
purpose, index, ...) so that re-running with the same master seed rebuilds
the exact same streams regardless of execution order.
"""
from __future__ import annotations

import numpy as np


def derive_seed(*keys: int) -> int:
    """Stable unsigned 64-bit seed for a key tuple."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def make_rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
