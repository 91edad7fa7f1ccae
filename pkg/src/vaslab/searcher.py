"""Task-agnostic query-distribution network and cell selection.

The network stacks per-cell channels [p, o, normalized remaining budget] --
plus an already-chosen indicator as a fourth channel in the multi-query
variant -- and emits a full-support softmax over cells. Action probabilities
are renormalized over the currently allowed (unexplored and affordable)
cells; the log-probability used by the policy gradient is the renormalized
one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import backend, nn
from .env import CostModel, GridDims, cost_vector

SINGLE_CHANNELS = 3
MULTI_CHANNELS = 4


class EmptyAllowedSetError(ValueError):
    """Renormalization or selection over an empty allowed set."""


class NotEnoughCellsError(ValueError):
    """Asked for more picks than the allowed set can provide."""


@dataclass
class SearcherParams:
    """Weights of the search network plus its fixed shape."""

    params: nn.ParamSet  # w1 (2N, channels*N), b1, w2 (N, 2N), b2
    n: int
    channels: int  # 3 single-query, 4 multi-query

    def copy(self) -> "SearcherParams":
        return SearcherParams(self.params.copy(), self.n, self.channels)


def init_searcher(n: int, rng: np.random.Generator, channels: int = SINGLE_CHANNELS) -> SearcherParams:
    if channels not in (SINGLE_CHANNELS, MULTI_CHANNELS):
        raise ValueError(f"channels must be 3 or 4, got {channels}")
    params = nn.ParamSet()
    params["w1"] = nn.he_init(rng, 2 * n, channels * n)
    params["b1"] = np.zeros(2 * n)
    params["w2"] = nn.uniform_init(rng, n, 2 * n)
    params["b2"] = np.zeros(n)
    return SearcherParams(params, n, channels)


def stack_inputs(
    sp: SearcherParams,
    p: np.ndarray,
    o: np.ndarray,
    b_norm: float,
    psi: np.ndarray | None = None,
) -> np.ndarray:
    n = sp.n
    if p.shape != (n,) or o.shape != (n,):
        raise ValueError(f"p and o must be ({n},), got {p.shape} and {o.shape}")
    if (psi is not None) != (sp.channels == MULTI_CHANNELS):
        raise ValueError("psi must be given exactly when the searcher has 4 channels")
    x = np.empty(sp.channels * n)
    x[0:n] = p
    x[n : 2 * n] = o
    x[2 * n : 3 * n] = b_norm
    if psi is not None:
        if psi.shape != (n,):
            raise ValueError(f"psi must be ({n},), got {psi.shape}")
        x[3 * n :] = psi
    return x


def distribution_cached(sp, p, o, b_norm, psi=None):
    """Full-support softmax over all cells; returns (raw, cache)."""
    x = stack_inputs(sp, p, o, b_norm, psi)
    w = sp.params
    raw, a1 = backend.searcher_forward(w["w1"], w["b1"], w["w2"], w["b2"], x)
    return raw, (x, a1)


def distribution(sp, p, o, b_norm, psi=None) -> np.ndarray:
    raw, _ = distribution_cached(sp, p, o, b_norm, psi)
    return raw


def backward(sp: SearcherParams, cache, dlogits: np.ndarray):
    """Gradients given dLoss/dlogits (pre-softmax). Returns (grads, dp) where
    dp is the loss gradient w.r.t. the probability input channel."""
    x, a1 = cache
    w = sp.params
    dw1, db1, dw2, db2, dx = backend.searcher_backward(
        w["w1"], w["w2"], x, a1, np.ascontiguousarray(dlogits, dtype=np.float64)
    )
    grads = nn.ParamSet({"w1": dw1, "b1": db1, "w2": dw2, "b2": db2})
    return grads, dx[: sp.n]


def masked_distribution(raw: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Renormalizes `raw` over `allowed`; zero elsewhere."""
    allowed = np.asarray(allowed, dtype=np.intp)
    if allowed.size == 0:
        raise EmptyAllowedSetError("allowed set is empty")
    q = np.zeros_like(raw)
    q[allowed] = raw[allowed] / raw[allowed].sum()
    return q


def masked_log_prob(raw: np.ndarray, allowed: np.ndarray, cell: int) -> float:
    """log of the renormalized probability of `cell` within `allowed`."""
    allowed = np.asarray(allowed, dtype=np.intp)
    if allowed.size == 0:
        raise EmptyAllowedSetError("allowed set is empty")
    if cell not in allowed:
        raise ValueError(f"cell {cell} is not in the allowed set")
    return float(math.log(raw[cell]) - math.log(raw[allowed].sum()))


class PickTracker:
    """Affordability bookkeeping for the picks of one search step.

    Movement cost for pick r is measured from pick r-1 (the query resource
    moves sequentially); the first pick starts from the episode's last
    queried cell. Used both when selecting cells and when replaying a
    recorded step for the gradient computation.
    """

    def __init__(
        self,
        dims: GridDims,
        model: CostModel,
        explored: set[int],
        last_cell: int | None,
        budget: float,
    ):
        self.dims = dims
        self.model = model
        self.taken = set(explored)
        self.prev = last_cell
        self.budget = budget

    def allowed(self) -> np.ndarray:
        costs = cost_vector(self.model, self.dims, self.prev)
        ok = costs <= self.budget
        if self.taken:
            ok[list(self.taken)] = False
        return np.flatnonzero(ok)

    def psi(self) -> np.ndarray:
        """Indicator of cells queried earlier or already chosen this step."""
        out = np.zeros(self.dims.n)
        if self.taken:
            out[list(self.taken)] = 1.0
        return out

    def commit(self, cell: int) -> float:
        cost = cost_vector(self.model, self.dims, self.prev)[cell]
        self.taken.add(cell)
        self.budget -= cost
        self.prev = cell
        return float(cost)


@dataclass(frozen=True)
class Pick:
    cell: int
    log_prob: float
    cost: float


def _choose(raw: np.ndarray, allowed: np.ndarray, mode: str, rng) -> int:
    if mode == "greedy":
        return int(allowed[np.argmax(raw[allowed])])  # ties -> lowest index
    if mode == "sample":
        q = masked_distribution(raw, allowed)
        return nn.categorical_sample(q, rng)
    raise ValueError(f"mode must be 'sample' or 'greedy', not {mode!r}")


def select_topk(
    sp: SearcherParams,
    p: np.ndarray,
    o: np.ndarray,
    b_norm: float,
    tracker: PickTracker,
    r: int,
    mode: str,
    rng: np.random.Generator,
) -> list[Pick]:
    """Picks up to `r` distinct cells from one shared distribution,
    renormalizing over the shrinking allowed set between picks.

    Raises NotEnoughCellsError when `r` exceeds the initially allowed set;
    returns fewer than `r` picks only when a later pick becomes unaffordable.
    """
    if sp.channels != SINGLE_CHANNELS:
        raise ValueError("select_topk requires a 3-channel searcher")
    raw, _ = distribution_cached(sp, p, o, b_norm)
    return _pick_loop(lambda _tracker: raw, tracker, r, mode, rng)


def select_mq(
    sp: SearcherParams,
    p: np.ndarray,
    o: np.ndarray,
    b_norm: float,
    tracker: PickTracker,
    r: int,
    mode: str,
    rng: np.random.Generator,
) -> tuple[list[Pick], np.ndarray]:
    """Picks up to `r` distinct cells, recomputing the distribution before
    each pick with the already-chosen indicator channel updated. Returns the
    picks and the final indicator."""
    if sp.channels != MULTI_CHANNELS:
        raise ValueError("select_mq requires a 4-channel searcher")

    def raw_fn(tracker: PickTracker) -> np.ndarray:
        raw, _ = distribution_cached(sp, p, o, b_norm, psi=tracker.psi())
        return raw

    picks = _pick_loop(raw_fn, tracker, r, mode, rng)
    return picks, tracker.psi()


def _pick_loop(raw_fn, tracker: PickTracker, r: int, mode: str, rng) -> list[Pick]:
    if r < 1:
        raise ValueError("r must be at least 1")
    first_allowed = tracker.allowed()
    if r > first_allowed.size:
        raise NotEnoughCellsError(f"asked for {r} picks, only {first_allowed.size} cells allowed")
    picks: list[Pick] = []
    for k in range(r):
        allowed = first_allowed if k == 0 else tracker.allowed()
        if allowed.size == 0:
            break  # later pick priced out by the budget
        raw = raw_fn(tracker)
        cell = _choose(raw, allowed, mode, rng)
        log_prob = masked_log_prob(raw, allowed, cell)
        cost = tracker.commit(cell)
        picks.append(Pick(cell=cell, log_prob=log_prob, cost=cost))
    return picks


def save_searcher(sp: SearcherParams, path) -> None:
    payload = {
        "format_version": nn.CHECKPOINT_VERSION,
        "kind": "searcher",
        "n": sp.n,
        "channels": sp.channels,
        "params": sp.params.to_jsonable(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_searcher(path) -> SearcherParams:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "searcher":
        raise ValueError(f"not a searcher checkpoint: {path}")
    if payload.get("format_version") != nn.CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('format_version')!r}")
    return SearcherParams(
        params=nn.ParamSet.from_jsonable(payload["params"]),
        n=int(payload["n"]),
        channels=int(payload["channels"]),
    )
