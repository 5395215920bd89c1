"""Streaming observation whitening.

Welford accumulation keeps the estimator stable over millions of updates.
During training every observation first updates the statistics and is then
normalized; frozen copies (evaluation, replayed checkpoints) only read.
"""
from __future__ import annotations

import numpy as np

from .errors import UsageError

_CLIP = 10.0
_EPS = 1e-8


class RunningStats:
    """Per-dimension running mean/variance with clipped z-scoring."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise UsageError(f"stats dimension must be positive, got {dim}")
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, x: np.ndarray) -> None:
        if x.shape != (self.dim,):
            raise UsageError(f"expected shape ({self.dim},), got {x.shape}")
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def var(self) -> np.ndarray:
        if self.count == 0:
            return np.ones(self.dim)
        return self.m2 / self.count

    def normalize(self, x: np.ndarray) -> np.ndarray:
        if self.count == 0:
            return np.clip(x, -_CLIP, _CLIP)
        z = (x - self.mean) / np.sqrt(self.var + _EPS)
        return np.clip(z, -_CLIP, _CLIP)

    def transform(self, x: np.ndarray, update: bool = True) -> np.ndarray:
        """Normalize one observation, folding it into the statistics first."""
        if update:
            self.update(x)
        return self.normalize(x)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            "count": np.array([self.count], dtype=np.float64),
            "mean": self.mean.copy(),
            "m2": self.m2.copy(),
        }

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        count = int(state["count"][0])
        mean = np.asarray(state["mean"], dtype=np.float64)
        m2 = np.asarray(state["m2"], dtype=np.float64)
        if mean.shape != (self.dim,) or m2.shape != (self.dim,):
            raise UsageError(
                f"stats of dimension {mean.shape} cannot load into dimension {self.dim}"
            )
        self.count = count
        self.mean = mean.copy()
        self.m2 = m2.copy()

    def copy(self) -> "RunningStats":
        out = RunningStats(self.dim)
        out.load_state_dict(self.state_dict())
        return out
