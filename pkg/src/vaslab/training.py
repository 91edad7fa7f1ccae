"""Episode rollouts, policy-gradient updates, and the training loop.

Two training regimes share the rollout machinery:

* joint mode ("psvas"): the predictor is fixed within an episode; at the end
  of each batch both networks take one Adam step on the REINFORCE loss plus
  a weighted cross-entropy on the labels collected during the episodes. The
  policy-gradient term flows into the predictor through its probability
  output.
* meta mode ("mpsvas" and variants): a clone of the predictor is adapted
  after every step during the rollout; the batch update then treats the
  recorded probabilities as constants for the searcher's policy gradient and
  refreshes the predictor *initialization* with the supervised loss alone.

At decision time the searcher is always frozen; the predictor is optionally
adapted after each query, exactly as during meta-mode rollouts.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn, predictor, searcher
from .env import CostModel, EpisodeState, Task, affordable_unexplored, apply_query
from .predictor import PredictorParams, forward_cached, init_predictor
from .searcher import (
    MULTI_CHANNELS,
    SINGLE_CHANNELS,
    PickTracker,
    SearcherParams,
    distribution_cached,
    init_searcher,
    masked_distribution,
    select_mq,
    select_topk,
)

MODES = ("psvas", "mpsvas", "mpsvas-topk", "mpsvas-mq")

DEFAULT_BUDGETS = {"manhattan": (25.0, 50.0, 75.0), "uniform": (12.0, 15.0, 18.0)}


@dataclass
class TrainConfig:
    mode: str = "psvas"
    lam: float = 0.1  # weight of the supervised loss ("lambda" in config files)
    gamma: float = 0.99
    lr: float = 1e-4
    lr_inner: float = 1e-4
    batch_episodes: int = 16
    epochs: int = 200
    budgets: tuple[float, ...] | None = None  # None -> per-cost-kind default
    cost_kind: str = "manhattan"
    initial_cost: float | None = None  # None -> 1 uniform, 0 manhattan
    r: int = 1  # queries per step
    seed: int = 0
    hidden_per_cell: int = predictor.DEFAULT_HIDDEN_PER_CELL
    full_label_bce: bool = False  # supervise on all cells, not just queried ones
    use_return_baseline: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.batch_episodes < 1:
            raise ValueError("batch_episodes must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.budgets is not None:
            self.budgets = tuple(float(b) for b in self.budgets)

    @property
    def channels(self) -> int:
        return MULTI_CHANNELS if self.mode == "mpsvas-mq" else SINGLE_CHANNELS

    def to_cost_model(self) -> CostModel:
        if self.initial_cost is not None:
            return CostModel(self.cost_kind, float(self.initial_cost))
        return CostModel.uniform() if self.cost_kind == "uniform" else CostModel.manhattan()

    def resolved_budgets(self) -> tuple[float, ...]:
        return self.budgets if self.budgets is not None else DEFAULT_BUDGETS[self.cost_kind]

    def to_jsonable(self) -> dict:
        out = {
            "mode": self.mode,
            "lambda": self.lam,
            "gamma": self.gamma,
            "lr": self.lr,
            "lr_inner": self.lr_inner,
            "batch_episodes": self.batch_episodes,
            "epochs": self.epochs,
            "budgets": list(self.budgets) if self.budgets is not None else None,
            "cost_kind": self.cost_kind,
            "initial_cost": self.initial_cost,
            "r": self.r,
            "seed": self.seed,
            "hidden_per_cell": self.hidden_per_cell,
            "full_label_bce": self.full_label_bce,
            "use_return_baseline": self.use_return_baseline,
        }
        return out

    @classmethod
    def from_jsonable(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "lambda" in obj:
            obj["lam"] = obj.pop("lambda")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if obj.get("budgets") is not None:
            obj["budgets"] = tuple(obj["budgets"])
        return cls(**obj)


@dataclass
class Transition:
    """One search step: input snapshots plus the picked cells and outcomes."""

    step: int
    p: np.ndarray  # predictor output fed to the searcher at this step
    o: np.ndarray  # observation vector before the step
    b_norm: float
    last_cell: int | None
    remaining_budget: float  # before the step
    cells: list[int] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    rewards: list[int] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)

    @property
    def step_reward(self) -> int:
        return sum(self.rewards)


@dataclass
class EpisodeRecord:
    task: Task
    transitions: list[Transition]
    observed: dict[int, int]  # cell -> label, for every cell queried
    total_reward: float
    initial_budget: float

    def __len__(self) -> int:
        return len(self.transitions)


def discounted_returns(rewards, gamma: float) -> list[float]:
    """returns[t] = sum_k gamma^(k-t) * rewards[k] for k >= t."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def _rollout(
    pred: PredictorParams,
    srch: SearcherParams,
    task: Task,
    budget: float,
    model: CostModel,
    r: int,
    rng: np.random.Generator,
    action_mode: str = "sample",
    inner_lr: float | None = None,
) -> EpisodeRecord:
    """Runs one episode to termination. When `inner_lr` is set, `pred` is
    adapted in place after every step on all labels observed so far, with the
    gradient taken at the step's pre-query observation snapshot (so the new
    labels must be explained by features and context, not read back from o).
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    state = EpisodeState.initial(task, budget)
    adam = nn.AdamState.for_params(pred.params) if inner_lr is not None else None
    transitions: list[Transition] = []
    observed: dict[int, int] = {}
    while True:
        allowed0 = affordable_unexplored(state, task, model)
        if allowed0.size == 0:
            break
        p = predictor.predict(pred, task.features, state.o)
        b_norm = state.remaining_budget / state.initial_budget
        tr = Transition(
            step=len(transitions),
            p=p,
            o=state.o.copy(),
            b_norm=b_norm,
            last_cell=state.last_cell,
            remaining_budget=state.remaining_budget,
        )
        tracker = PickTracker(task.dims, model, state.explored, state.last_cell, state.remaining_budget)
        r_step = min(r, allowed0.size)
        if srch.channels == MULTI_CHANNELS:
            picks, _ = select_mq(srch, p, tr.o, b_norm, tracker, r_step, action_mode, rng)
        else:
            picks = select_topk(srch, p, tr.o, b_norm, tracker, r_step, action_mode, rng)
        for pick in picks:
            outcome, state = apply_query(state, task, model, pick.cell)
            tr.cells.append(pick.cell)
            tr.log_probs.append(pick.log_prob)
            tr.rewards.append(outcome.reward)
            tr.costs.append(pick.cost)
            observed[pick.cell] = outcome.label
        transitions.append(tr)
        if inner_lr is not None:
            predictor.adapt_inner(pred, task.features, tr.o, observed, inner_lr, adam)
    return EpisodeRecord(
        task=task,
        transitions=transitions,
        observed=observed,
        total_reward=float(state.total_reward),
        initial_budget=float(budget),
    )


def run_episode_psvas(pred, srch, task, budget, model, r, rng) -> EpisodeRecord:
    """Training rollout with the predictor held fixed for the episode."""
    return _rollout(pred, srch, task, budget, model, r, rng, action_mode="sample")


def run_episode_mpsvas(
    pred_init, srch, task, budget, model, r, lr_inner, rng
) -> tuple[EpisodeRecord, PredictorParams]:
    """Training rollout that adapts a clone of the predictor after every
    step; returns the record and the drifted clone."""
    drifted = pred_init.copy()
    rec = _rollout(
        drifted, srch, task, budget, model, r, rng, action_mode="sample", inner_lr=lr_inner
    )
    return rec, drifted


def run_inference(
    pred,
    srch,
    task,
    budget,
    model,
    r: int = 1,
    adapt: bool = True,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
    lr_inner: float = 1e-4,
) -> EpisodeRecord:
    """Decision-time episode: the searcher is frozen; a clone of the
    predictor is adapted after each query iff `adapt`."""
    if rng is None:
        rng = np.random.default_rng()
    return _rollout(
        pred.copy(), srch, task, budget, model, r, rng,
        action_mode=mode, inner_lr=lr_inner if adapt else None,
    )


def _explored_from_o(o: np.ndarray) -> set[int]:
    return set(int(j) for j in np.flatnonzero(o != 0.0))


def _bce_mask_target(rec: EpisodeRecord, full_labels: bool):
    n = rec.task.dims.n
    if full_labels:
        return np.ones(n), rec.task.labels.astype(np.float64)
    return predictor.observed_mask_target(n, rec.observed)


def _accumulate(dst: nn.ParamSet, src: nn.ParamSet) -> None:
    for name in dst:
        dst[name] += src[name]


def _batch_grads(
    pred: PredictorParams,
    srch: SearcherParams,
    records: list[EpisodeRecord],
    model: CostModel,
    cfg: TrainConfig,
    through_predictor: bool,
):
    """Gradient accumulation shared by both update rules.

    REINFORCE term: for every recorded pick, the logit-space gradient of the
    renormalized log-probability is (onehot - masked distribution); it is
    weighted by the step's discounted return and backpropagated through the
    searcher. With `through_predictor`, the searcher's probability input is
    recomputed from `pred` and the chain continues into the predictor;
    otherwise the recorded probabilities are constants (stop-gradient).

    Supervised term: masked cross-entropy at every visited observation
    snapshot against the labels collected in the episode, scaled by lam.

    Returns (pred grads, searcher grads, summed bce loss, bce term count).
    """
    gp = pred.params.zeros_like()
    gs = srch.params.zeros_like()
    bce_sum = 0.0
    bce_terms = 0
    for rec in records:
        step_rewards = [tr.step_reward for tr in rec.transitions]
        returns = discounted_returns(step_rewards, cfg.gamma)
        baseline = float(np.mean(returns)) if (cfg.use_return_baseline and returns) else 0.0
        mask, target = _bce_mask_target(rec, cfg.full_label_bce)
        features = rec.task.features
        dims = rec.task.dims
        for t, tr in enumerate(rec.transitions):
            g_t = returns[t] - baseline
            if through_predictor:
                p_in, cache = forward_cached(pred, features, tr.o)
            else:
                p_in, cache = tr.p, None
            dp_rl = np.zeros(srch.n)
            tracker = PickTracker(
                dims, model, _explored_from_o(tr.o), tr.last_cell, tr.remaining_budget
            )
            if srch.channels == MULTI_CHANNELS:
                for cell in tr.cells:
                    allowed = tracker.allowed()
                    psi = tracker.psi()
                    raw, s_cache = distribution_cached(srch, p_in, tr.o, tr.b_norm, psi)
                    q = masked_distribution(raw, allowed)
                    dz = g_t * q
                    dz[cell] -= g_t
                    grads_s, dp = searcher.backward(srch, s_cache, dz)
                    _accumulate(gs, grads_s)
                    dp_rl += dp
                    tracker.commit(cell)
            else:
                raw, s_cache = distribution_cached(srch, p_in, tr.o, tr.b_norm)
                dz = np.zeros(srch.n)
                for cell in tr.cells:
                    allowed = tracker.allowed()
                    q = masked_distribution(raw, allowed)
                    dz += g_t * q
                    dz[cell] -= g_t
                    tracker.commit(cell)
                grads_s, dp = searcher.backward(srch, s_cache, dz)
                _accumulate(gs, grads_s)
                dp_rl += dp
            if through_predictor:
                loss, dp_bce = nn.bce_loss(p_in, target, mask)
                _accumulate(gp, predictor.backward(pred, cache, dp_rl + cfg.lam * dp_bce))
            else:
                p0, cache0 = forward_cached(pred, features, tr.o)
                loss, dp_bce = nn.bce_loss(p0, target, mask)
                if cfg.lam > 0:
                    _accumulate(gp, predictor.backward(pred, cache0, cfg.lam * dp_bce))
            bce_sum += loss
            bce_terms += 1
    return gp, gs, bce_sum, bce_terms


def psvas_update(pred, srch, records, cfg, model, pred_adam, srch_adam) -> float:
    """Joint update: REINFORCE (through both networks) plus lam-weighted
    cross-entropy on the predictor, one Adam step each. Records must have
    been produced with the current parameters. Returns the mean supervised
    loss per visited step."""
    gp, gs, bce_sum, bce_terms = _batch_grads(pred, srch, records, model, cfg, through_predictor=True)
    nn.adam_step(pred.params, gp, pred_adam, cfg.lr)
    nn.adam_step(srch.params, gs, srch_adam, cfg.lr)
    return bce_sum / max(bce_terms, 1)


def mpsvas_outer_update(pred_init, srch, records, cfg, model, pred_adam, srch_adam) -> float:
    """Outer update of meta mode: the searcher takes the REINFORCE gradient
    with the recorded probabilities treated as constants; the predictor
    initialization takes the supervised gradient evaluated at itself (not at
    the drifted per-episode clones)."""
    gp, gs, bce_sum, bce_terms = _batch_grads(
        pred_init, srch, records, model, cfg, through_predictor=False
    )
    nn.adam_step(pred_init.params, gp, pred_adam, cfg.lr)
    nn.adam_step(srch.params, gs, srch_adam, cfg.lr)
    return bce_sum / max(bce_terms, 1)


@dataclass
class TrainLogRow:
    epoch: int
    batch: int
    mean_episode_reward: float
    mean_bce: float
    wallclock_ms: float


def write_training_log(rows: list[TrainLogRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,batch,mean_episode_reward,mean_bce,wallclock_ms\n")
        for r in rows:
            fh.write(
                f"{r.epoch},{r.batch},{r.mean_episode_reward!r},{r.mean_bce!r},{r.wallclock_ms:.3f}\n"
            )


def train(
    cfg: TrainConfig,
    tasks: list[Task],
    *,
    initial: tuple[PredictorParams, SearcherParams] | None = None,
    progress=None,
) -> tuple[PredictorParams, SearcherParams, list[TrainLogRow]]:
    """Trains from scratch on `tasks` per the config; returns the trained
    networks and the per-batch log."""
    if not tasks:
        raise ValueError("need at least one training task")
    dims = tasks[0].dims
    d = tasks[0].feature_dim
    for t in tasks:
        if t.dims != dims or t.feature_dim != d:
            raise ValueError("all training tasks must share grid dims and feature_dim")
    model = cfg.to_cost_model()
    budgets = cfg.resolved_budgets()
    init_rng = np.random.default_rng([cfg.seed, 0])
    episode_rng = np.random.default_rng([cfg.seed, 1])
    if initial is not None:
        pred, srch = initial[0].copy(), initial[1].copy()
        if srch.channels != cfg.channels:
            raise ValueError(f"mode {cfg.mode} needs a {cfg.channels}-channel searcher")
    else:
        pred = init_predictor(dims.n, d, init_rng, cfg.hidden_per_cell)
        srch = init_searcher(dims.n, init_rng, cfg.channels)
    pred_adam = nn.AdamState.for_params(pred.params)
    srch_adam = nn.AdamState.for_params(srch.params)
    rows: list[TrainLogRow] = []
    for epoch in range(cfg.epochs):
        order = episode_rng.permutation(len(tasks))
        for bi, start in enumerate(range(0, len(order), cfg.batch_episodes)):
            t0 = time.perf_counter()
            chunk = order[start : start + cfg.batch_episodes]
            records = []
            for idx in chunk:
                budget = budgets[int(episode_rng.integers(len(budgets)))]
                if cfg.mode == "psvas":
                    rec = run_episode_psvas(pred, srch, tasks[idx], budget, model, cfg.r, episode_rng)
                else:
                    rec, _ = run_episode_mpsvas(
                        pred, srch, tasks[idx], budget, model, cfg.r, cfg.lr_inner, episode_rng
                    )
                records.append(rec)
            if cfg.mode == "psvas":
                mean_bce = psvas_update(pred, srch, records, cfg, model, pred_adam, srch_adam)
            else:
                mean_bce = mpsvas_outer_update(pred, srch, records, cfg, model, pred_adam, srch_adam)
            mean_reward = float(np.mean([r.total_reward for r in records]))
            rows.append(
                TrainLogRow(epoch, bi, mean_reward, mean_bce, (time.perf_counter() - t0) * 1e3)
            )
        if progress is not None:
            progress(epoch, rows)
    return pred, srch, rows


MANIFEST_NAME = "manifest.json"
PREDICTOR_NAME = "predictor.json"
SEARCHER_NAME = "searcher.json"


def save_checkpoint(dirpath, pred, srch, cfg: TrainConfig, extra: dict | None = None) -> None:
    os.makedirs(dirpath, exist_ok=True)
    predictor.save_predictor(pred, os.path.join(dirpath, PREDICTOR_NAME))
    searcher.save_searcher(srch, os.path.join(dirpath, SEARCHER_NAME))
    manifest = {
        "format_version": nn.CHECKPOINT_VERSION,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "config": cfg.to_jsonable(),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(dirpath, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_checkpoint(dirpath):
    pred = predictor.load_predictor(os.path.join(dirpath, PREDICTOR_NAME))
    srch = searcher.load_searcher(os.path.join(dirpath, SEARCHER_NAME))
    with open(os.path.join(dirpath, MANIFEST_NAME)) as fh:
        manifest = json.load(fh)
    return pred, srch, manifest
