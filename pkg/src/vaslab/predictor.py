"""Per-cell target-probability network and its query-time adaptation.

Layout mirrors the stacked inputs of the search problem: each cell's feature
vector is concatenated with that cell's observation entry, a weight-shared
affine+ReLU runs per cell, and two dense layers mix across the grid into one
probability per cell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import backend, nn

DEFAULT_HIDDEN_PER_CELL = 3


@dataclass
class PredictorParams:
    """Weights of the prediction network plus its fixed shape."""

    params: nn.ParamSet  # w1 (h, D+1), b1, w2 (2N, N*h), b2, w3 (N, 2N), b3
    n: int
    feature_dim: int
    hidden_per_cell: int

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.params.copy(), self.n, self.feature_dim, self.hidden_per_cell)


def init_predictor(
    n: int,
    feature_dim: int,
    rng: np.random.Generator,
    hidden_per_cell: int = DEFAULT_HIDDEN_PER_CELL,
) -> PredictorParams:
    h = hidden_per_cell
    params = nn.ParamSet()
    params["w1"] = nn.he_init(rng, h, feature_dim + 1)
    params["b1"] = np.zeros(h)
    params["w2"] = nn.he_init(rng, 2 * n, n * h)
    params["b2"] = np.zeros(2 * n)
    params["w3"] = nn.uniform_init(rng, n, 2 * n)
    params["b3"] = np.zeros(n)
    return PredictorParams(params, n, feature_dim, h)


def _stack_cell_inputs(pp: PredictorParams, features: np.ndarray, o: np.ndarray) -> np.ndarray:
    if features.shape != (pp.n, pp.feature_dim):
        raise ValueError(f"features must be ({pp.n}, {pp.feature_dim}), got {features.shape}")
    if o.shape != (pp.n,):
        raise ValueError(f"o must be ({pp.n},), got {o.shape}")
    x = np.empty((pp.n, pp.feature_dim + 1))
    x[:, : pp.feature_dim] = features
    x[:, pp.feature_dim] = o
    return x


def forward_cached(pp: PredictorParams, features: np.ndarray, o: np.ndarray):
    """Full forward pass returning (p, cache) for a later backward call."""
    x = _stack_cell_inputs(pp, features, o)
    w = pp.params
    s, a1, a2 = backend.predictor_forward(w["w1"], w["b1"], w["w2"], w["b2"], w["w3"], w["b3"], x)
    p = nn.clamp_probs(s)
    return p, (x, a1, a2, s)


def backward(pp: PredictorParams, cache, dp: np.ndarray) -> nn.ParamSet:
    """Gradients of a scalar loss over all weights, given dLoss/dp."""
    x, a1, a2, s = cache
    w = pp.params
    dw1, db1, dw2, db2, dw3, db3 = backend.predictor_backward(
        w["w2"], w["w3"], x, a1, a2, s, np.ascontiguousarray(dp, dtype=np.float64)
    )
    return nn.ParamSet(
        {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "w3": dw3, "b3": db3}
    )


def predict(pp: PredictorParams, features: np.ndarray, o: np.ndarray) -> np.ndarray:
    """Per-cell target probabilities in [PROB_EPS, 1 - PROB_EPS]."""
    p, _ = forward_cached(pp, features, o)
    return p


def bce_grad(
    pp: PredictorParams,
    features: np.ndarray,
    o: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray | None = None,
):
    """Masked cross-entropy at the current prediction and its full backward
    pass. Returns (loss, gradients over the weights)."""
    p, cache = forward_cached(pp, features, o)
    loss, dp = nn.bce_loss(p, target, mask)
    return loss, backward(pp, cache, dp)


def observed_mask_target(n: int, observed: Mapping[int, int]):
    """Expands {cell: label} into (mask, target) vectors of length n."""
    mask = np.zeros(n)
    target = np.zeros(n)
    for cell, label in observed.items():
        if not 0 <= cell < n:
            raise IndexError(f"cell {cell} out of range [0, {n})")
        mask[cell] = 1.0
        target[cell] = float(label)
    return mask, target


def adapt_inner(
    pp: PredictorParams,
    features: np.ndarray,
    o: np.ndarray,
    observed: Mapping[int, int],
    lr: float,
    adam: nn.AdamState,
) -> float:
    """One Adam step on the cross-entropy against observed labels, in place.

    Equivalent to a step on the pseudo-label target that copies observed
    labels and the model's own predictions elsewhere: self-targeted cells
    contribute zero gradient, so only observed cells drive the update.
    Returns the masked loss before the step (0.0 when nothing is observed).
    """
    if not observed:
        return 0.0
    mask, target = observed_mask_target(pp.n, observed)
    loss, grads = bce_grad(pp, features, o, target, mask)
    nn.adam_step(pp.params, grads, adam, lr)
    return loss


def save_predictor(pp: PredictorParams, path) -> None:
    payload = {
        "format_version": nn.CHECKPOINT_VERSION,
        "kind": "predictor",
        "n": pp.n,
        "feature_dim": pp.feature_dim,
        "hidden_per_cell": pp.hidden_per_cell,
        "params": pp.params.to_jsonable(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_predictor(path) -> PredictorParams:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "predictor":
        raise ValueError(f"not a predictor checkpoint: {path}")
    if payload.get("format_version") != nn.CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('format_version')!r}")
    return PredictorParams(
        params=nn.ParamSet.from_jsonable(payload["params"]),
        n=int(payload["n"]),
        feature_dim=int(payload["feature_dim"]),
        hidden_per_cell=int(payload["hidden_per_cell"]),
    )
