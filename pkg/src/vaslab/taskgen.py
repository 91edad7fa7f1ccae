"""Synthetic search tasks with controllable spatial correlation and
distribution shift, plus the on-disk task format.

Labels come from thresholding a smoothed noise field at the top target-rate
quantile, so targets arrive in spatial blobs with a stable count per task.
Features are unit Gaussian noise plus a class-direction bump on target
cells; shifting the class direction yields out-of-distribution tasks whose
features mislead any predictor fit on the original direction.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import uniform_filter

from .env import GridDims, Task

# Default feature bump size; calibrated so a logistic probe on generated
# tasks scores AUC ~ 0.85 (see tests/test_taskgen.py).
DEFAULT_SNR = 1.5

TASK_FORMAT_VERSION = 1
INDEX_NAME = "index.json"
SPLITS = ("train", "test", "ood")


@dataclass(frozen=True)
class GenConfig:
    dims: GridDims
    feature_dim: int = 32
    target_rate: float = 0.1
    smoothing: int = 1  # box half-width in cells; 0 disables smoothing
    smoothing_mode: str = "wrap"  # toroidal keeps the label field free of position priors
    snr: float = DEFAULT_SNR
    class_direction: np.ndarray | None = None  # None -> draw once per task set
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.target_rate <= 1.0:
            raise ValueError("target_rate must be in (0, 1]")
        if self.smoothing < 0:
            raise ValueError("smoothing must be nonnegative")
        if self.smoothing_mode not in ("wrap", "reflect"):
            raise ValueError("smoothing_mode must be 'wrap' or 'reflect'")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if self.class_direction is not None:
            d = np.ascontiguousarray(self.class_direction, dtype=np.float64)
            if d.shape != (self.feature_dim,):
                raise ValueError(f"class_direction must have length {self.feature_dim}")
            norm = np.linalg.norm(d)
            if not math.isclose(norm, 1.0, rel_tol=1e-9):
                raise ValueError("class_direction must be unit norm")
            object.__setattr__(self, "class_direction", d)


def random_direction(feature_dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(feature_dim)
    return v / np.linalg.norm(v)


def with_direction(cfg: GenConfig, rng: np.random.Generator) -> GenConfig:
    """Resolves class_direction=None to a concrete random unit vector."""
    if cfg.class_direction is not None:
        return cfg
    return replace(cfg, class_direction=random_direction(cfg.feature_dim, rng))


def shift_class(cfg: GenConfig, rng: np.random.Generator) -> GenConfig:
    """Same generator with a fresh random class direction: the target class
    changes while the grid statistics stay identical."""
    return replace(cfg, class_direction=random_direction(cfg.feature_dim, rng))


def generate_task(cfg: GenConfig, rng: np.random.Generator) -> Task:
    """Samples one task: smoothed-noise labels, noisy directional features."""
    if cfg.class_direction is None:
        raise ValueError("class_direction is unresolved; call with_direction first")
    dims = cfg.dims
    n = dims.n
    field = rng.standard_normal((dims.rows, dims.cols))
    if cfg.smoothing > 0:
        field = uniform_filter(field, size=2 * cfg.smoothing + 1, mode=cfg.smoothing_mode)
    flat = field.reshape(-1)
    n_targets = min(n, math.ceil(cfg.target_rate * n))
    labels = np.zeros(n, dtype=np.int64)
    if n_targets > 0:
        top = np.argsort(-flat, kind="stable")[:n_targets]
        labels[top] = 1
    features = rng.standard_normal((n, cfg.feature_dim))
    features += cfg.snr * labels[:, None] * cfg.class_direction[None, :]
    meta = {
        "generator": "smoothed-noise-quantile",
        "target_rate": repr(cfg.target_rate),
        "smoothing": str(cfg.smoothing),
        "snr": repr(cfg.snr),
    }
    return Task(dims=dims, features=features, labels=labels, meta=meta)


def generate_tasks(cfg: GenConfig, count: int, *, seed_offset: int = 0) -> list[Task]:
    """Batch generation with per-task derived seeds (cfg.seed, task index)."""
    out = []
    for i in range(count):
        rng = np.random.default_rng([cfg.seed, seed_offset + i])
        out.append(generate_task(cfg, rng))
    return out


def save_task(task: Task, path) -> None:
    payload = {
        "format_version": TASK_FORMAT_VERSION,
        "rows": task.dims.rows,
        "cols": task.dims.cols,
        "feature_dim": task.feature_dim,
        "labels": task.labels.tolist(),
        "features": task.features.ravel().tolist(),
        "meta": task.meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_task(path) -> Task:
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("format_version", "rows", "cols", "feature_dim", "labels", "features"):
        if key not in payload:
            raise ValueError(f"task file {path} is missing field {key!r}")
    if payload["format_version"] != TASK_FORMAT_VERSION:
        raise ValueError(f"unsupported task format version {payload['format_version']!r}")
    dims = GridDims(int(payload["rows"]), int(payload["cols"]))
    d = int(payload["feature_dim"])
    labels = np.asarray(payload["labels"], dtype=np.int64)
    features = np.asarray(payload["features"], dtype=np.float64)
    if labels.shape != (dims.n,):
        raise ValueError(f"task file {path}: {labels.size} labels for {dims.n} cells")
    if features.size != dims.n * d:
        raise ValueError(f"task file {path}: {features.size} feature values, expected {dims.n * d}")
    return Task(
        dims=dims,
        features=features.reshape(dims.n, d),
        labels=labels,
        meta=dict(payload.get("meta", {})),
    )


def save_taskset(directory, tasks_by_split: dict[str, list[Task]]) -> None:
    """Writes one file per task plus an index listing paths and split tags."""
    os.makedirs(directory, exist_ok=True)
    index = []
    counter = 0
    for split, tasks in tasks_by_split.items():
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        for task in tasks:
            rel = f"task_{counter:05d}.json"
            save_task(task, os.path.join(directory, rel))
            index.append({"path": rel, "split": split})
            counter += 1
    with open(os.path.join(directory, INDEX_NAME), "w") as fh:
        json.dump({"tasks": index}, fh, indent=1)


def load_taskset(directory, split: str | None = None) -> list[Task]:
    index_path = os.path.join(directory, INDEX_NAME)
    with open(index_path) as fh:
        index = json.load(fh)
    if "tasks" not in index:
        raise ValueError(f"index file {index_path} is missing field 'tasks'")
    out = []
    for entry in index["tasks"]:
        if split is not None and entry.get("split") != split:
            continue
        out.append(load_task(os.path.join(directory, entry["path"])))
    return out
