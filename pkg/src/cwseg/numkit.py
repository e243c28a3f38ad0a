"""Small dense-numeric toolkit: activations, stable log-sum-exp, inverted
dropout, parameter initialization, and RMSProp updates.

Everything operates on plain float64 numpy arrays; gradients elsewhere in
the package are derived by hand, so nothing here builds a graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Matrix = np.ndarray


def relu(x: Matrix) -> Matrix:
    return np.maximum(x, 0.0)


def logsumexp(x, axis: int | None = None):
    """log(sum(exp(x))) with max-shift; exact for constant vectors.

    Slices that are entirely -inf yield -inf instead of nan.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("logsumexp of an empty array")
    m = np.max(arr, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(arr - shift), axis=axis, keepdims=True)) + shift
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def dropout_apply(
    x: Matrix, rate: float, rng: np.random.Generator | None, training: bool
) -> tuple[Matrix, Matrix]:
    """Inverted dropout.

    Returns ``(out, mask)`` where mask entries are 0 (dropped) or
    1/(1 - rate) (kept, pre-scaled), so ``out = x * mask`` and multiplying
    by the same mask replays the op in the backward pass.  Inference mode
    or rate 0 is the identity with an all-ones mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, np.ones_like(x)
    if rng is None:
        raise ValueError("dropout in training mode requires an rng")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def glorot_scale(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_uniform(shape, scale: float, rng: np.random.Generator) -> Matrix:
    """i.i.d. uniform in [-scale, +scale]; deterministic for a seeded rng."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return rng.uniform(-scale, scale, size=shape)


@dataclass
class OptState:
    """RMSProp state for one parameter array."""

    acc: np.ndarray
    rho: float = 0.9
    eps: float = 1e-8
    lr: float = 0.001

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.lr <= 0.0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if np.any(self.acc < 0.0):
            raise ValueError("accumulator entries must be non-negative")

    @classmethod
    def for_param(
        cls, param: np.ndarray, *, rho: float = 0.9, eps: float = 1e-8, lr: float = 0.001
    ) -> "OptState":
        return cls(np.zeros_like(param), rho=rho, eps=eps, lr=lr)


def rmsprop_step(
    param: Matrix, grad: Matrix, state: OptState
) -> tuple[Matrix, OptState]:
    """acc <- rho*acc + (1-rho)*grad^2;  param <- param - lr*grad/sqrt(acc+eps).

    Updates ``param`` and ``state.acc`` in place and returns them.
    """
    if param.shape != grad.shape or param.shape != state.acc.shape:
        raise ValueError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"acc {state.acc.shape}"
        )
    state.acc *= state.rho
    state.acc += (1.0 - state.rho) * grad * grad
    param -= state.lr * grad / np.sqrt(state.acc + state.eps)
    return param, state
