"""Gamma/epoch calibration sweep for the joint-training efficacy target."""

import sys
import time

import numpy as np

from vaslab.env import CostModel, GridDims
from vaslab.evaluation import VasPolicy, evaluate
from vaslab.taskgen import GenConfig, generate_tasks, with_direction
from vaslab.training import TrainConfig, train

GAMMA = float(sys.argv[1])
EPOCHS = int(sys.argv[2])
LR = float(sys.argv[3]) if len(sys.argv) > 3 else 1e-3

cfg = with_direction(
    GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=1, seed=100),
    np.random.default_rng(200),
)
train_tasks = generate_tasks(cfg, 3000)
test_tasks = generate_tasks(cfg, 200, seed_offset=3000)
model = CostModel.uniform()

tc = TrainConfig(mode="psvas", lam=0.1, epochs=EPOCHS, cost_kind="uniform",
                 budgets=(12.0, 15.0, 18.0), seed=0, lr=LR, full_label_bce=True, gamma=GAMMA)
t0 = time.perf_counter()
pred, srch, rows = train(tc, train_tasks)
t_train = time.perf_counter() - t0
per_epoch = 3000 // 16
curve = [float(np.mean([r.mean_episode_reward for r in rows[i * per_epoch:(i + 1) * per_epoch]]))
         for i in range(EPOCHS)]
print(f"gamma={GAMMA} epochs={EPOCHS} lr={LR}: train {t_train:.0f}s")
print("  reward curve:", " ".join(f"{v:.2f}" for v in curve))
for mode in ("sample", "greedy"):
    pol = VasPolicy(pred, srch, adapt=True, lr_inner=1e-3, action_mode=mode, name=mode)
    rep = evaluate(pol, test_tasks, model, [15.0], trials=5, seed=42)
    print(f"  {mode}: ANT {rep.rows[0].ant:.3f}  [{rep.rows[0].ci_lo:.3f}, {rep.rows[0].ci_hi:.3f}]",
          flush=True)
