"""Minimal dense network with analytic gradients, plus Adam and Huber loss.

Everything is float64 numpy. Weights are [fan_in, fan_out] matrices; a
forward pass over a batch X is X @ W + b with rectifier hidden layers and
an identity output layer.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericalError, UsageError


def he_init(sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """Alternating weight/bias arrays for the given layer sizes.

    The output layer is scaled down so initial value estimates sit near
    zero; early TD targets then reflect observed rewards rather than
    initialization noise, which matters under sparse target refreshes.
    """
    params: list[np.ndarray] = []
    last = len(sizes) - 2
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = np.sqrt(2.0 / fan_in)
        if i == last:
            scale *= 0.01
        params.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


class Mlp:
    """Rectifier network; `sizes` includes input and output widths."""

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None):
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise UsageError(f"invalid layer sizes {sizes}")
        self.sizes = list(sizes)
        if rng is None:
            self.params = []
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                self.params.append(np.zeros((fan_in, fan_out)))
                self.params.append(np.zeros(fan_out))
        else:
            self.params = he_init(self.sizes, rng)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self._forward_cached(np.atleast_2d(x))[0]

    def _forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        for layer in range(self.n_layers):
            w, b = self.params[2 * layer], self.params[2 * layer + 1]
            h = h @ w + b
            if layer < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], dout: np.ndarray) -> list[np.ndarray]:
        """Gradients for every parameter given upstream dL/doutput."""
        if dout.shape != acts[-1].shape:
            raise UsageError(
                f"gradient shape {dout.shape} does not match output {acts[-1].shape}"
            )
        grads: list[np.ndarray] = [np.empty(0)] * len(self.params)
        delta = dout
        for layer in range(self.n_layers - 1, -1, -1):
            w = self.params[2 * layer]
            inp = acts[layer]
            grads[2 * layer] = inp.T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ w.T) * (acts[layer] > 0.0)
        return grads

    def copy_from(self, other: "Mlp") -> None:
        if self.sizes != other.sizes:
            raise UsageError("cannot copy parameters between different layouts")
        self.params = [p.copy() for p in other.params]

    def clone(self) -> "Mlp":
        out = Mlp(self.sizes)
        out.copy_from(self)
        return out

    def assert_finite(self) -> None:
        for p in self.params:
            if not np.isfinite(p).all():
                raise NumericalError("network parameters are no longer finite")


def huber(residual: np.ndarray, delta: float = 1.0) -> np.ndarray:
    a = np.abs(residual)
    return np.where(a <= delta, 0.5 * residual**2, delta * (a - 0.5 * delta))


def huber_grad(residual: np.ndarray, delta: float = 1.0) -> np.ndarray:
    return np.clip(residual, -delta, delta)


class Adam:
    """Adaptive moment optimizer over a flat parameter list."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float = 3e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise UsageError("optimizer state does not match parameter list")
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
