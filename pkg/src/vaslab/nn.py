"""Minimal dense numerical core for the two policy networks.

The networks are small fixed stacks, so instead of an autodiff graph every
operation comes as a matched forward/backward pair whose analytic gradient
can be checked against central finite differences (`finite_diff_grad`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before any log.
PROB_EPS = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


class ParamSet:
    """Named, ordered collection of float64 arrays (one network's weights).

    Names are unique and shapes are fixed once assigned.
    """

    def __init__(self, arrays: dict[str, np.ndarray] | None = None):
        self._arrays: dict[str, np.ndarray] = {}
        if arrays:
            for name, arr in arrays.items():
                self[name] = arr

    def __setitem__(self, name: str, arr) -> None:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        old = self._arrays.get(name)
        if old is not None and old.shape != arr.shape:
            raise ValueError(f"shape of {name!r} is fixed at {old.shape}, got {arr.shape}")
        self._arrays[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def __iter__(self):
        return iter(self._arrays)

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    def n_entries(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def copy(self) -> "ParamSet":
        return ParamSet({k: v.copy() for k, v in self._arrays.items()})

    def zeros_like(self) -> "ParamSet":
        return ParamSet({k: np.zeros_like(v) for k, v in self._arrays.items()})

    def allclose(self, other: "ParamSet", rtol=1e-12, atol=1e-12) -> bool:
        if self.names() != other.names():
            return False
        return all(np.allclose(self[k], other[k], rtol=rtol, atol=atol) for k in self)

    def to_jsonable(self) -> dict:
        return {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in self._arrays.items()
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ParamSet":
        out = cls()
        for name, entry in obj.items():
            shape = tuple(entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64)
            if data.size != math.prod(shape):
                raise ValueError(f"parameter {name!r}: {data.size} values for shape {shape}")
            out[name] = data.reshape(shape)
        return out


def save_params(params: ParamSet, path) -> None:
    """Writes a versioned JSON checkpoint; doubles round-trip bit-exactly."""
    payload = {"format_version": CHECKPOINT_VERSION, "params": params.to_jsonable()}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_params(path) -> ParamSet:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('format_version')!r}")
    return ParamSet.from_jsonable(payload["params"])


@dataclass
class AdamState:
    """First/second moment accumulators mirroring one ParamSet."""

    m: ParamSet
    v: ParamSet
    t: int = 0

    @classmethod
    def for_params(cls, params: ParamSet) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like(), t=0)


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place on `params` and `state`."""
    from . import backend  # deferred: backend selects the per-array kernel

    if params.names() != grads.names():
        raise ValueError("gradient names do not match parameters")
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for {name!r}")
    state.t += 1
    for name in params:
        backend.adam_update(
            params[name], grads[name], state.m[name], state.v[name],
            state.t, lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
        )


def he_init(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Gaussian scaled by sqrt(2/fan_in); used ahead of ReLU layers."""
    return rng.standard_normal((out_dim, in_dim)) * math.sqrt(2.0 / in_dim)


def uniform_init(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Uniform in +-sqrt(1/fan_in); used for output layers."""
    lim = math.sqrt(1.0 / in_dim)
    return rng.uniform(-lim, lim, size=(out_dim, in_dim))


def affine_relu_forward(w: np.ndarray, b: np.ndarray, x: np.ndarray):
    """y = max(0, Wx + b). Returns (y, pre-activation) for the backward pass."""
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: W {w.shape}, b {b.shape}, x {x.shape}")
    z = w @ x + b
    return np.maximum(z, 0.0), z


def affine_relu_backward(w: np.ndarray, x: np.ndarray, z: np.ndarray, dy: np.ndarray):
    """Gradients (dW, db, dx) for affine_relu_forward given dLoss/dy."""
    dz = np.where(z > 0.0, dy, 0.0)
    return np.outer(dz, x), dz.copy(), w.T @ dz


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(np.asarray(x, dtype=np.float64))


def softmax(x: np.ndarray) -> np.ndarray:
    """Stable softmax (max subtraction); output sums to 1."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max())
    return e / e.sum()


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def bce_loss(p: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None):
    """Summed binary cross-entropy and its gradient dLoss/dp.

    Entries of `p` are clamped before the logs; `mask` selects contributing
    cells (gradient is zero outside it). Targets may be soft.
    """
    p = np.asarray(p, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if p.shape != target.shape:
        raise ValueError(f"length mismatch: p {p.shape}, target {target.shape}")
    q = clamp_probs(p)
    per_cell = -(target * np.log(q) + (1.0 - target) * np.log1p(-q))
    grad = (q - target) / (q * (1.0 - q))
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != p.shape:
            raise ValueError(f"length mismatch: mask {mask.shape}, p {p.shape}")
        per_cell = per_cell * mask
        grad = grad * mask
    return float(per_cell.sum()), grad


def categorical_sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over ascending indices."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a nonempty vector")
    if np.any(p < 0.0):
        raise ValueError("negative probability")
    total = p.sum()
    if total <= 0.0:
        raise ValueError("degenerate (all-zero) distribution")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, p.size - 1)


def finite_diff_grad(f, params: ParamSet, h: float = 1e-5) -> ParamSet:
    """Central-difference gradient of the scalar `f(params)` for every entry.

    Test oracle only: O(2 * n_entries) evaluations of f.
    """
    grads = params.zeros_like()
    for name, arr in params.items():
        flat = arr.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = f(params)
            flat[i] = orig - h
            f_minus = f(params)
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grads
