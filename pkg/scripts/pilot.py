"""Pilot run for calibrating the acceptance experiment configs."""

import sys
import time

import numpy as np

from vaslab.backend import backend_name
from vaslab.baselines import fit_classifier
from vaslab.env import CostModel, GridDims
from vaslab.evaluation import GreedyClassification, RandomSearch, VasPolicy, evaluate
from vaslab.taskgen import GenConfig, generate_tasks, shift_class, with_direction
from vaslab.training import TrainConfig, train

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 12
N_TRAIN = int(sys.argv[2]) if len(sys.argv) > 2 else 3000
LR = float(sys.argv[3]) if len(sys.argv) > 3 else 1e-3

print(f"backend: {backend_name()}  epochs={EPOCHS} n_train={N_TRAIN} lr={LR}")

cfg = with_direction(
    GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=1, seed=100),
    np.random.default_rng(200),
)
train_tasks = generate_tasks(cfg, N_TRAIN)
test_tasks = generate_tasks(cfg, 200, seed_offset=N_TRAIN)

tc = TrainConfig(mode="psvas", lam=0.1, epochs=EPOCHS, cost_kind="uniform",
                 budgets=(12.0, 15.0, 18.0), seed=0, lr=LR)
t0 = time.perf_counter()
pred, srch, rows = train(
    tc, train_tasks,
    progress=lambda e, r: print(
        f"  epoch {e}: reward {np.mean([x.mean_episode_reward for x in r[-N_TRAIN // 16:]]):.3f} "
        f"bce {np.mean([x.mean_bce for x in r[-N_TRAIN // 16:]]):.3f}", flush=True),
)
t_train = time.perf_counter() - t0
print(f"PSVAS training: {t_train:.1f}s")

model = CostModel.uniform()
budgets = [15.0]

t0 = time.perf_counter()
gc_pred = fit_classifier(train_tasks, epochs=max(1, 16000 // N_TRAIN), lr=1e-3, seed=0)
print(f"GC classifier fit: {time.perf_counter() - t0:.1f}s")

policies = {
    "psvas": VasPolicy(pred, srch, adapt=True, lr_inner=1e-3, name="psvas"),
    "psvas-frozen": VasPolicy(pred, srch, adapt=False, name="psvas-frozen"),
    "rs": RandomSearch(),
    "gc": GreedyClassification(gc_pred),
}
results = {}
for name, pol in policies.items():
    t0 = time.perf_counter()
    rep = evaluate(pol, test_tasks, model, budgets, trials=5, seed=42)
    row = rep.rows[0]
    results[name] = row.ant
    print(f"{name:>14}: ANT {row.ant:.3f}  [{row.ci_lo:.3f}, {row.ci_hi:.3f}]  "
          f"({time.perf_counter() - t0:.1f}s)")

print(f"\npsvas/rs = {results['psvas'] / results['rs']:.3f} (need >= 1.5)")
print(f"psvas/gc = {results['psvas'] / results['gc']:.3f} (need >= 1.1)")
