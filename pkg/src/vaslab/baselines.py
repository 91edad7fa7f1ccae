"""Reference search policies: random, static greedy classification, and a
greedy feature-similarity posterior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .env import CostModel, EpisodeState, Task, affordable_unexplored
from .predictor import PredictorParams, bce_grad, init_predictor, predict


def random_policy(state: EpisodeState, task: Task, model: CostModel, rng) -> int:
    """Uniform over affordable unexplored cells."""
    allowed = affordable_unexplored(state, task, model)
    if allowed.size == 0:
        raise ValueError("no affordable unexplored cell (terminal state)")
    return int(allowed[rng.integers(allowed.size)])


def greedy_classification_policy(p_static: np.ndarray, state, task, model) -> int:
    """Highest static score among affordable unexplored cells; the ranking is
    fixed at episode start and never refreshed. Ties go to the lowest index."""
    allowed = affordable_unexplored(state, task, model)
    if allowed.size == 0:
        raise ValueError("no affordable unexplored cell (terminal state)")
    return int(allowed[np.argmax(p_static[allowed])])


def median_bandwidth(features: np.ndarray) -> float:
    """Median pairwise feature distance; the default similarity bandwidth."""
    diff = features[:, None, :] - features[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    iu = np.triu_indices(features.shape[0], k=1)
    return float(np.median(dist[iu]))


@dataclass
class KnnPosterior:
    """Beta-smoothed label estimate under a Gaussian feature kernel.

    posterior_j = (alpha + sum_i w_ij y_i) / (alpha + beta + sum_i w_ij)
    over labeled cells i, with w_ij = exp(-||z_i - z_j||^2 / (2 sigma^2)).
    """

    sigma: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0 or self.alpha <= 0 or self.beta <= 0:
            raise ValueError("sigma, alpha, beta must be positive")

    def posterior(self, task: Task, labeled: dict[int, int]) -> np.ndarray:
        prior = self.alpha / (self.alpha + self.beta)
        if not labeled:
            return np.full(task.dims.n, prior)
        cells = np.fromiter(labeled.keys(), dtype=np.intp)
        ys = np.fromiter((labeled[int(c)] for c in cells), dtype=np.float64)
        diff = task.features[None, cells, :] - task.features[:, None, :]
        w = np.exp(-(diff**2).sum(axis=2) / (2.0 * self.sigma**2))  # (N, |labeled|)
        num = self.alpha + w @ ys
        den = self.alpha + self.beta + w.sum(axis=1)
        return num / den


def knn_active_search_policy(post: KnnPosterior, task, state, model) -> int:
    """Greedy one-step choice on the posterior refit to all labels observed
    so far. Ties go to the lowest index."""
    allowed = affordable_unexplored(state, task, model)
    if allowed.size == 0:
        raise ValueError("no affordable unexplored cell (terminal state)")
    labeled = {out.cell: out.label for out in state.log}
    p = post.posterior(task, labeled)
    return int(allowed[np.argmax(p[allowed])])


def fit_classifier(
    tasks: list[Task],
    *,
    epochs: int = 60,
    lr: float = 1e-3,
    seed: int = 0,
    hidden_per_cell: int | None = None,
) -> PredictorParams:
    """Trains a predictor with the supervised loss alone (all labels, blank
    observations): the static classifier behind the greedy-classification
    baseline."""
    if not tasks:
        raise ValueError("need at least one task")
    n = tasks[0].dims.n
    d = tasks[0].feature_dim
    rng = np.random.default_rng([seed, 0])
    kwargs = {} if hidden_per_cell is None else {"hidden_per_cell": hidden_per_cell}
    pred = init_predictor(n, d, rng, **kwargs)
    adam = nn.AdamState.for_params(pred.params)
    o = np.zeros(n)
    order_rng = np.random.default_rng([seed, 1])
    for _ in range(epochs):
        for idx in order_rng.permutation(len(tasks)):
            task = tasks[idx]
            _, grads = bce_grad(pred, task.features, o, task.labels.astype(np.float64))
            nn.adam_step(pred.params, grads, adam, lr)
    return pred


def static_scores(pred: PredictorParams, task: Task) -> np.ndarray:
    """Classifier scores with no query information (o = 0)."""
    return predict(pred, task.features, np.zeros(task.dims.n))
