"""Ceiling analysis: how much is there to gain from live predictions?"""

import sys
import time

import numpy as np

from vaslab.baselines import fit_classifier, greedy_classification_policy
from vaslab.env import CostModel, EpisodeState, GridDims, apply_query, is_terminal
from vaslab.evaluation import GreedyClassification, RandomSearch, StepPolicy, VasPolicy, evaluate
from vaslab.predictor import predict
from vaslab.taskgen import GenConfig, generate_tasks, with_direction
from vaslab.training import TrainConfig, train

SMOOTH = int(sys.argv[1]) if len(sys.argv) > 1 else 2
LR = float(sys.argv[2]) if len(sys.argv) > 2 else 2e-3
EPOCHS = int(sys.argv[3]) if len(sys.argv) > 3 else 16


class LivePredGreedy(StepPolicy):
    """Argmax of the predictor re-evaluated at the live observation vector:
    the searcher-free ceiling of the prediction pathway."""

    name = "live-pred"

    def __init__(self, pred):
        self.pred = pred

    def choose(self, state, task, model, rng):
        p = predict(self.pred, task.features, state.o)
        return greedy_classification_policy(p, state, task, model)


cfg = with_direction(
    GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=SMOOTH, seed=100),
    np.random.default_rng(200),
)
train_tasks = generate_tasks(cfg, 3000)
test_tasks = generate_tasks(cfg, 200, seed_offset=3000)
model = CostModel.uniform()

tc = TrainConfig(mode="psvas", lam=0.1, epochs=EPOCHS, cost_kind="uniform",
                 budgets=(12.0, 15.0, 18.0), seed=0, lr=LR, full_label_bce=True, gamma=0.3)
t0 = time.perf_counter()
pred, srch, rows = train(tc, train_tasks)
per_epoch = 3000 // 16
curve = [float(np.mean([r.mean_episode_reward for r in rows[i * per_epoch:(i + 1) * per_epoch]]))
         for i in range(EPOCHS)]
print(f"smooth={SMOOTH} lr={LR} epochs={EPOCHS}: train {time.perf_counter() - t0:.0f}s")
print("  curve:", " ".join(f"{v:.2f}" for v in curve), flush=True)

gc_pred = fit_classifier(train_tasks, epochs=5, lr=1e-3, seed=0)
pols = {
    "psvas-greedy": VasPolicy(pred, srch, adapt=False, action_mode="greedy", name="pg"),
    "psvas-sample": VasPolicy(pred, srch, adapt=False, name="ps"),
    "live-pred-greedy": LivePredGreedy(pred),
    "gc": GreedyClassification(gc_pred),
    "rs": RandomSearch(),
}
res = {}
for name, pol in pols.items():
    rep = evaluate(pol, test_tasks, model, [15.0], trials=5, seed=42)
    res[name] = rep.rows[0].ant
    print(f"  {name:>18}: ANT {rep.rows[0].ant:.3f}", flush=True)
print(f"  greedy/gc {res['psvas-greedy'] / res['gc']:.3f}   "
      f"live-ceiling/gc {res['live-pred-greedy'] / res['gc']:.3f}")
