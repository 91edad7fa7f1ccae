"""Second pilot: full-label supervision, longer training, eval-mode effects."""

import sys
import time

import numpy as np
from sklearn.metrics import roc_auc_score

from vaslab.backend import backend_name
from vaslab.baselines import fit_classifier, static_scores
from vaslab.env import CostModel, GridDims
from vaslab.evaluation import GreedyClassification, RandomSearch, VasPolicy, evaluate
from vaslab.taskgen import GenConfig, generate_tasks, with_direction
from vaslab.training import TrainConfig, train

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 16
N_TRAIN = int(sys.argv[2]) if len(sys.argv) > 2 else 3000
FULL = bool(int(sys.argv[3])) if len(sys.argv) > 3 else True

print(f"backend: {backend_name()}  epochs={EPOCHS} n_train={N_TRAIN} full_label={FULL}")

cfg = with_direction(
    GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=1, seed=100),
    np.random.default_rng(200),
)
train_tasks = generate_tasks(cfg, N_TRAIN)
test_tasks = generate_tasks(cfg, 200, seed_offset=N_TRAIN)

tc = TrainConfig(mode="psvas", lam=0.1, epochs=EPOCHS, cost_kind="uniform",
                 budgets=(12.0, 15.0, 18.0), seed=0, lr=1e-3, full_label_bce=FULL)
t0 = time.perf_counter()
pred, srch, rows = train(
    tc, train_tasks,
    progress=lambda e, r: print(
        f"  epoch {e}: reward {np.mean([x.mean_episode_reward for x in r[-N_TRAIN // 16:]]):.3f} "
        f"bce {np.mean([x.mean_bce for x in r[-N_TRAIN // 16:]]):.3f}", flush=True)
        if e % 2 == 0 else None,
)
print(f"PSVAS training: {time.perf_counter() - t0:.1f}s")

ys = np.concatenate([t.labels for t in test_tasks])
ss = np.concatenate([static_scores(pred, t) for t in test_tasks])
print(f"PSVAS predictor static AUC: {roc_auc_score(ys, ss):.3f}")

model = CostModel.uniform()
gc_pred = fit_classifier(train_tasks, epochs=max(1, 16000 // N_TRAIN), lr=1e-3, seed=0)
ss = np.concatenate([static_scores(gc_pred, t) for t in test_tasks])
print(f"GC classifier static AUC: {roc_auc_score(ys, ss):.3f}")

policies = {
    "psvas-sample": VasPolicy(pred, srch, adapt=True, lr_inner=1e-3, name="s"),
    "psvas-greedy": VasPolicy(pred, srch, adapt=True, lr_inner=1e-3, action_mode="greedy", name="g"),
    "psvas-frozen-greedy": VasPolicy(pred, srch, adapt=False, action_mode="greedy", name="fg"),
    "rs": RandomSearch(),
    "gc": GreedyClassification(gc_pred),
}
results = {}
for name, pol in policies.items():
    rep = evaluate(pol, test_tasks, model, [15.0], trials=5, seed=42)
    row = rep.rows[0]
    results[name] = row.ant
    print(f"{name:>22}: ANT {row.ant:.3f}  [{row.ci_lo:.3f}, {row.ci_hi:.3f}]")

print(f"\nsample/rs = {results['psvas-sample'] / results['rs']:.3f}  "
      f"sample/gc = {results['psvas-sample'] / results['gc']:.3f}")
print(f"greedy/rs = {results['psvas-greedy'] / results['rs']:.3f}  "
      f"greedy/gc = {results['psvas-greedy'] / results['gc']:.3f}")
