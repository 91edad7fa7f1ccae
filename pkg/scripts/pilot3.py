"""Third pilot: baseline flag, lr sweep, searcher-exploitation diagnostics."""

import sys
import time

import numpy as np

from vaslab.backend import backend_name
from vaslab.baselines import static_scores
from vaslab.env import CostModel, GridDims
from vaslab.evaluation import GreedyClassification, RandomSearch, VasPolicy, evaluate
from vaslab.taskgen import GenConfig, generate_tasks, with_direction
from vaslab.training import TrainConfig, train

EPOCHS = int(sys.argv[1])
LR = float(sys.argv[2])
BASELINE = bool(int(sys.argv[3]))
N_TRAIN = 3000

print(f"backend: {backend_name()}  epochs={EPOCHS} lr={LR} baseline={BASELINE}")

cfg = with_direction(
    GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=1, seed=100),
    np.random.default_rng(200),
)
train_tasks = generate_tasks(cfg, N_TRAIN)
test_tasks = generate_tasks(cfg, 200, seed_offset=N_TRAIN)

tc = TrainConfig(mode="psvas", lam=0.1, epochs=EPOCHS, cost_kind="uniform",
                 budgets=(12.0, 15.0, 18.0), seed=0, lr=LR, full_label_bce=True,
                 use_return_baseline=BASELINE)
t0 = time.perf_counter()
pred, srch, rows = train(
    tc, train_tasks,
    progress=lambda e, r: print(
        f"  epoch {e}: reward {np.mean([x.mean_episode_reward for x in r[-N_TRAIN // 16:]]):.3f}",
        flush=True) if e % 4 == 0 else None,
)
print(f"training: {time.perf_counter() - t0:.1f}s")

model = CostModel.uniform()
policies = {
    "psvas-sample": VasPolicy(pred, srch, adapt=True, lr_inner=1e-3, name="s"),
    "psvas-greedy": VasPolicy(pred, srch, adapt=True, lr_inner=1e-3, action_mode="greedy", name="g"),
    "gc-on-psvas-pred": GreedyClassification(lambda t: static_scores(pred, t), name="gp"),
    "rs": RandomSearch(),
}
for name, pol in policies.items():
    rep = evaluate(pol, test_tasks, model, [15.0], trials=5, seed=42)
    row = rep.rows[0]
    print(f"{name:>18}: ANT {row.ant:.3f}  [{row.ci_lo:.3f}, {row.ci_hi:.3f}]")
