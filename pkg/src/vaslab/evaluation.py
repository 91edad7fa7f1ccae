"""Evaluation harness: average-targets-found reports, a small-instance
optimal-value oracle, and trajectory dumps."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import baselines
from .env import CostModel, EpisodeState, Task, apply_query, is_terminal
from .predictor import PredictorParams
from .searcher import SearcherParams
from .training import EpisodeRecord, run_inference

CSV_HEADER = ["policy", "cost_model", "budget", "ant", "std", "ci_lo", "ci_hi", "n_tasks", "n_trials"]
BOOTSTRAP_RESAMPLES = 1000


@dataclass
class EvalRow:
    budget: float
    ant: float
    std: float
    ci_lo: float
    ci_hi: float
    n_tasks: int
    n_trials: int


@dataclass
class EvalReport:
    policy: str
    cost_model: str
    rows: list[EvalRow] = field(default_factory=list)
    runtime_ms: float = 0.0


def write_report_csv(reports: list[EvalReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rep in reports:
            for row in rep.rows:
                writer.writerow(
                    [rep.policy, rep.cost_model, repr(row.budget), repr(row.ant), repr(row.std),
                     repr(row.ci_lo), repr(row.ci_hi), row.n_tasks, row.n_trials]
                )


def read_report_csv(path) -> list[EvalReport]:
    reports: dict[tuple[str, str], EvalReport] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected report header {header}")
        for rec in reader:
            key = (rec[0], rec[1])
            rep = reports.setdefault(key, EvalReport(policy=rec[0], cost_model=rec[1]))
            rep.rows.append(
                EvalRow(
                    budget=float(rec[2]), ant=float(rec[3]), std=float(rec[4]),
                    ci_lo=float(rec[5]), ci_hi=float(rec[6]),
                    n_tasks=int(rec[7]), n_trials=int(rec[8]),
                )
            )
    return list(reports.values())


class Policy:
    """One evaluable search policy: runs an episode, returns total reward."""

    name = "policy"

    def episode(self, task: Task, budget: float, model: CostModel, rng) -> float:
        raise NotImplementedError


class VasPolicy(Policy):
    """A trained predictor/searcher checkpoint."""

    def __init__(
        self,
        pred: PredictorParams,
        srch: SearcherParams,
        *,
        r: int = 1,
        adapt: bool = True,
        action_mode: str = "sample",
        lr_inner: float = 1e-4,
        name: str | None = None,
    ):
        self.pred = pred
        self.srch = srch
        self.r = r
        self.adapt = adapt
        self.action_mode = action_mode
        self.lr_inner = lr_inner
        self.name = name or ("vas-adaptive" if adapt else "vas-frozen")

    def episode(self, task, budget, model, rng) -> float:
        rec = self.run(task, budget, model, rng)
        return rec.total_reward

    def run(self, task, budget, model, rng) -> EpisodeRecord:
        return run_inference(
            self.pred, self.srch, task, budget, model,
            r=self.r, adapt=self.adapt, mode=self.action_mode, rng=rng,
            lr_inner=self.lr_inner,
        )


class StepPolicy(Policy):
    """Adapter for the per-step baseline choosers."""

    def episode(self, task, budget, model, rng) -> float:
        state = EpisodeState.initial(task, budget)
        self.start(task)
        while not is_terminal(state, task, model):
            cell = self.choose(state, task, model, rng)
            _, state = apply_query(state, task, model, cell)
        return float(state.total_reward)

    def start(self, task: Task) -> None:
        pass

    def choose(self, state, task, model, rng) -> int:
        raise NotImplementedError


class RandomSearch(StepPolicy):
    name = "random"

    def choose(self, state, task, model, rng) -> int:
        return baselines.random_policy(state, task, model, rng)


class GreedyClassification(StepPolicy):
    """Static ranking computed once per task from a supervised classifier
    (or any per-task score function)."""

    name = "gc"

    def __init__(self, scorer, name: str | None = None):
        # scorer: PredictorParams or callable task -> score vector
        if isinstance(scorer, PredictorParams):
            self._score_fn = lambda task: baselines.static_scores(scorer, task)
        else:
            self._score_fn = scorer
        if name:
            self.name = name
        self._scores = None

    def start(self, task) -> None:
        self._scores = np.asarray(self._score_fn(task), dtype=np.float64)

    def choose(self, state, task, model, rng) -> int:
        return baselines.greedy_classification_policy(self._scores, state, task, model)


class KnnActiveSearch(StepPolicy):
    """Greedy posterior search; bandwidth defaults to the per-task median
    pairwise feature distance."""

    name = "knn-as"

    def __init__(self, alpha: float = 1.0, beta: float = 1.0, sigma: float | None = None):
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self._post = None

    def start(self, task) -> None:
        sigma = self.sigma if self.sigma is not None else baselines.median_bandwidth(task.features)
        self._post = baselines.KnnPosterior(sigma=sigma, alpha=self.alpha, beta=self.beta)

    def choose(self, state, task, model, rng) -> int:
        return baselines.knn_active_search_policy(self._post, task, state, model)


def per_task_means(
    policy: Policy,
    tasks: list[Task],
    model: CostModel,
    budget: float,
    *,
    trials: int = 5,
    seed: int = 0,
    budget_index: int = 0,
) -> np.ndarray:
    """Mean total reward per task over `trials` seeded episodes. Episode
    seeds depend on (seed, budget_index, task, trial) only, so different
    policies evaluated with the same seed share random streams and pair
    cleanly task by task."""
    out = np.empty(len(tasks))
    for ti, task in enumerate(tasks):
        rewards = [
            policy.episode(task, budget, model,
                           np.random.default_rng([seed, budget_index, ti, trial]))
            for trial in range(trials)
        ]
        out[ti] = np.mean(rewards)
    return out


def evaluate(
    policy: Policy,
    tasks: list[Task],
    model: CostModel,
    budgets: list[float],
    *,
    trials: int = 5,
    seed: int = 0,
) -> EvalReport:
    """Runs policy x task x trial x budget episodes; the headline number per
    budget is the mean total reward, with a percentile bootstrap interval
    over per-task means."""
    if not tasks:
        raise ValueError("need at least one task")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    t0 = time.perf_counter()
    report = EvalReport(policy=policy.name, cost_model=model.kind)
    for bi, budget in enumerate(budgets):
        task_means = per_task_means(policy, tasks, model, budget,
                                    trials=trials, seed=seed, budget_index=bi)
        boot_rng = np.random.default_rng([seed, bi, 1_000_003])
        boot = np.empty(BOOTSTRAP_RESAMPLES)
        for k in range(BOOTSTRAP_RESAMPLES):
            boot[k] = task_means[boot_rng.integers(len(tasks), size=len(tasks))].mean()
        report.rows.append(
            EvalRow(
                budget=float(budget),
                ant=float(task_means.mean()),
                std=float(task_means.std(ddof=1)) if len(tasks) > 1 else 0.0,
                ci_lo=float(np.percentile(boot, 2.5)),
                ci_hi=float(np.percentile(boot, 97.5)),
                n_tasks=len(tasks),
                n_trials=trials,
            )
        )
    report.runtime_ms = (time.perf_counter() - t0) * 1e3
    return report


def brute_force_value(p_true, budget: int, method: str = "sorted") -> float:
    """Optimal expected total reward for independent per-cell target
    probabilities under unit query costs.

    method="sorted": the sum of the `budget` largest probabilities (the
    closed form; adaptivity gains nothing when cells are independent).
    method="enumerate": exact value of the best *adaptive* policy by explicit
    enumeration over the outcome tree, for validating the closed form.
    """
    p = np.asarray(p_true, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("p_true must be a vector")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    budget = int(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    n = p.size
    if method == "sorted":
        if budget >= n:
            return float(p.sum())
        return float(np.sort(p)[::-1][:budget].sum())
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    if n > 12:
        raise ValueError("enumeration supports at most 12 cells")

    @lru_cache(maxsize=None)
    def value(explored_mask: int, remaining: int) -> float:
        if remaining == 0:
            return 0.0
        best = 0.0
        for j in range(n):
            if explored_mask & (1 << j):
                continue
            # Branch per outcome: the continuation may differ between them.
            v_hit = value(explored_mask | (1 << j), remaining - 1)
            v_miss = value(explored_mask | (1 << j), remaining - 1)
            v = p[j] * (1.0 + v_hit) + (1.0 - p[j]) * v_miss
            best = max(best, v)
        return best

    return value(0, min(budget, n))


def dump_trajectory(record: EpisodeRecord, path) -> None:
    """Writes the episode as ordered per-query JSON entries with the
    predictor heatmap active when each pick was made."""
    dims = record.task.dims
    steps = []
    for tr in record.transitions:
        budget_after = tr.remaining_budget
        for cell, cost in zip(tr.cells, tr.costs):
            budget_after -= cost
            row, col = dims.cell_rc(cell)
            steps.append(
                {
                    "cell": int(cell),
                    "row": int(row),
                    "col": int(col),
                    "label": int(record.observed[cell]),
                    "B_after": float(budget_after),
                    "p_heatmap": [float(v) for v in tr.p],
                }
            )
    payload = {
        "format_version": 1,
        "rows": dims.rows,
        "cols": dims.cols,
        "initial_budget": record.initial_budget,
        "total_reward": record.total_reward,
        "steps": steps,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
