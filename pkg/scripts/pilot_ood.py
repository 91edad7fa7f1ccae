"""Calibrates criteria 5-8 at the final experiment config: trains the PSVAS /
USVAS / meta family and measures the paired orderings on test and shifted
tasks."""

import time

import numpy as np
from scipy.stats import binomtest

from vaslab.env import CostModel, GridDims
from vaslab.evaluation import VasPolicy, per_task_means
from vaslab.taskgen import GenConfig, generate_tasks, shift_class, with_direction
from vaslab.training import TrainConfig, train

N_TRAIN = 6000
cfg = with_direction(
    GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=2, seed=100),
    np.random.default_rng(200),
)
train_tasks = generate_tasks(cfg, N_TRAIN)
test_tasks = generate_tasks(cfg, 300, seed_offset=N_TRAIN)
ood_tasks = generate_tasks(shift_class(cfg, np.random.default_rng(300)), 300, seed_offset=9000)
model = CostModel.uniform()

common = dict(lam=0.1, cost_kind="uniform", budgets=(12.0, 15.0, 18.0),
              seed=0, lr=2e-3, full_label_bce=True, gamma=0.3)


def timed_train(label, tc):
    t0 = time.perf_counter()
    pred, srch, rows = train(tc, train_tasks)
    last = np.mean([r.mean_episode_reward for r in rows[-(N_TRAIN // 16):]])
    print(f"{label}: {time.perf_counter() - t0:.0f}s, last-epoch train reward {last:.3f}",
          flush=True)
    return pred, srch


psvas = timed_train("psvas 24ep", TrainConfig(mode="psvas", epochs=24, **common))
usvas = timed_train("usvas 24ep", TrainConfig(mode="psvas", epochs=24, **{**common, "lam": 0.0}))
mpsvas = timed_train("mpsvas 12ep",
                     TrainConfig(mode="mpsvas", epochs=12, lr_inner=1e-2, **common))


def paired(pol_a, pol_b, tasks, budget=15.0, trials=1, seed=77):
    a = per_task_means(pol_a, tasks, model, budget, trials=trials, seed=seed)
    b = per_task_means(pol_b, tasks, model, budget, trials=trials, seed=seed)
    diff = a - b
    wins = int((diff > 0).sum())
    losses = int((diff < 0).sum())
    p = binomtest(wins, wins + losses, alternative="greater").pvalue if wins + losses else 1.0
    return a.mean(), b.mean(), diff.mean(), wins, losses, p


# criterion 5: psvas vs usvas on test tasks
a, b, d, w, l, p = paired(
    VasPolicy(*psvas, adapt=False, action_mode="greedy", name="psvas"),
    VasPolicy(*usvas, adapt=False, action_mode="greedy", name="usvas"),
    test_tasks,
)
print(f"c5 psvas vs usvas (test): {a:.3f} vs {b:.3f} diff {d:+.3f} wins {w}/{w + l} p={p:.2e}",
      flush=True)

# criterion 6: adapt vs frozen on ood, per checkpoint and inner rate
for name, ckpt in (("psvas", psvas), ("mpsvas", mpsvas)):
    for lr_inner in (1e-3, 3e-3, 1e-2, 3e-2):
        a, b, d, w, l, p = paired(
            VasPolicy(*ckpt, adapt=True, lr_inner=lr_inner, action_mode="greedy", name="a"),
            VasPolicy(*ckpt, adapt=False, action_mode="greedy", name="f"),
            ood_tasks,
        )
        print(f"c6 {name} ood lr_inner={lr_inner:g}: adapt {a:.3f} frozen {b:.3f} "
              f"diff {d:+.3f} wins {w}/{w + l} p={p:.2e}", flush=True)

# criterion 6 sanity on test tasks (adaptation should not hurt much in-dist)
for lr_inner in (1e-3, 1e-2):
    a, b, d, w, l, p = paired(
        VasPolicy(*psvas, adapt=True, lr_inner=lr_inner, action_mode="greedy", name="a"),
        VasPolicy(*psvas, adapt=False, action_mode="greedy", name="f"),
        test_tasks,
    )
    print(f"   psvas test lr_inner={lr_inner:g}: adapt {a:.3f} frozen {b:.3f} diff {d:+.3f}",
          flush=True)

# criterion 7: mpsvas vs psvas, both adaptive, on ood
for lr_inner in (1e-2, 3e-2):
    a, b, d, w, l, p = paired(
        VasPolicy(*mpsvas, adapt=True, lr_inner=lr_inner, action_mode="greedy", name="m"),
        VasPolicy(*psvas, adapt=True, lr_inner=lr_inner, action_mode="greedy", name="p"),
        ood_tasks,
    )
    print(f"c7 mpsvas vs psvas ood lr_inner={lr_inner:g}: {a:.3f} vs {b:.3f} "
          f"diff {d:+.3f} wins {w}/{w + l} p={p:.2e}", flush=True)
