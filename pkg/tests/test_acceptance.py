"""Acceptance suite: one test per criterion, printing a PASS line each.

The heavy criteria (4-8) share session-scoped trained checkpoints over one
synthetic task laboratory; run with `pytest tests/test_acceptance.py -v -s`
to watch progress. Experiment-level settings (task geometry, training
length, learning rates) live in the LAB/TRAIN constants below; package
DEFAULTS are not changed by this suite.
"""

import time

import numpy as np
import pytest
from scipy.stats import binomtest

from conftest import make_task
from vaslab import nn
from vaslab.baselines import fit_classifier
from vaslab.env import CostModel, EpisodeState, GridDims, affordable_unexplored, apply_query
from vaslab.evaluation import (
    GreedyClassification,
    RandomSearch,
    VasPolicy,
    brute_force_value,
    per_task_means,
)
from vaslab.predictor import init_predictor, predict
from vaslab.searcher import distribution, init_searcher, masked_log_prob
from vaslab.taskgen import GenConfig, generate_tasks, shift_class, with_direction
from vaslab.training import TrainConfig, train

# ---------------------------------------------------------------------------
# experiment configuration (calibrated; see /root/pkg/README.md)

LAB_DIMS = GridDims(7, 7)
LAB_SEED = 100
LAB = dict(dims=LAB_DIMS, feature_dim=32, target_rate=0.1, smoothing=2, seed=LAB_SEED)
N_TRAIN = 6000
N_EVAL = 300
EVAL_BUDGET = 15.0
EVAL_TRIALS = 1  # greedy decision rules are deterministic per task
EVAL_SEED = 77

TRAIN_COMMON = dict(
    cost_kind="uniform",
    budgets=(12.0, 15.0, 18.0),
    seed=0,
    lr=2e-3,
    gamma=0.3,
    full_label_bce=True,
)
PSVAS_EPOCHS = 24
META_EPOCHS = 12
LR_INNER = 1e-2

UNIFORM = CostModel.uniform()


def report(name, ok, detail):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, detail


def sign_test(diff):
    wins = int((diff > 0).sum())
    losses = int((diff < 0).sum())
    if wins + losses == 0:
        return wins, losses, 1.0
    return wins, losses, binomtest(wins, wins + losses, alternative="greater").pvalue


# ---------------------------------------------------------------------------
# shared artifacts


@pytest.fixture(scope="session")
def lab_tasks():
    base = with_direction(GenConfig(**LAB), np.random.default_rng(200))
    ood_cfg = shift_class(base, np.random.default_rng(300))
    return {
        "train": generate_tasks(base, N_TRAIN),
        "test": generate_tasks(base, N_EVAL, seed_offset=N_TRAIN),
        "ood": generate_tasks(ood_cfg, N_EVAL, seed_offset=9000),
    }


@pytest.fixture(scope="session")
def psvas_ckpt(lab_tasks):
    cfg = TrainConfig(mode="psvas", lam=0.1, epochs=PSVAS_EPOCHS, **TRAIN_COMMON)
    t0 = time.perf_counter()
    pred, srch, _ = train(cfg, lab_tasks["train"])
    return pred, srch, time.perf_counter() - t0


@pytest.fixture(scope="session")
def usvas_ckpt(lab_tasks):
    cfg = TrainConfig(mode="psvas", lam=0.0, epochs=PSVAS_EPOCHS, **TRAIN_COMMON)
    pred, srch, _ = train(cfg, lab_tasks["train"])
    return pred, srch


@pytest.fixture(scope="session")
def mpsvas_ckpt(lab_tasks):
    cfg = TrainConfig(mode="mpsvas", lam=0.1, epochs=META_EPOCHS, lr_inner=LR_INNER,
                      **TRAIN_COMMON)
    pred, srch, _ = train(cfg, lab_tasks["train"])
    return pred, srch


@pytest.fixture(scope="session")
def gc_classifier(lab_tasks):
    return fit_classifier(lab_tasks["train"], epochs=3, lr=1e-3, seed=0)


def greedy_policy(ckpt, adapt, name, r=1):
    return VasPolicy(ckpt[0], ckpt[1], r=r, adapt=adapt, action_mode="greedy",
                     lr_inner=LR_INNER, name=name)


def means(policy, tasks, budget=EVAL_BUDGET, trials=EVAL_TRIALS, seed=EVAL_SEED):
    return per_task_means(policy, tasks, UNIFORM, budget, trials=trials, seed=seed)


# ---------------------------------------------------------------------------
# criterion 1: gradient correctness


def randomize(params, rng):
    """Entries uniform in [-1, 1]; avoids the zero-bias pathology where a
    whole ReLU layer sits exactly on its kink (central differences are
    invalid there)."""
    for name in params:
        params[name][...] = rng.uniform(-1, 1, params[name].shape)


def away_from_kinks(pp, feats, o, margin=1e-4):
    """True when every ReLU pre-activation clears the finite-difference
    step, so the loss is smooth in the probed neighborhood."""
    w = pp.params
    x = np.concatenate([feats, o[:, None]], axis=1)
    z1 = x @ w["w1"].T + w["b1"]
    z2 = w["w2"] @ np.maximum(z1, 0.0).reshape(-1) + w["b2"]
    return min(np.abs(z1).min(), np.abs(z2).min()) > margin


class TestCriterion1:
    def test_gradients_match_finite_differences(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(1001)
        worst = 0.0
        checked = 0

        def rel_err(got, ref):
            scale = np.maximum(np.abs(ref), 1e-4)
            return float(np.max(np.abs(got - ref) / scale))

        # predictor BCE gradient and the BCE op itself
        done = 0
        while done < 35:
            n = int(rng.integers(2, 10))
            d = int(rng.integers(1, 5))
            pp = init_predictor(n, d, rng, hidden_per_cell=int(rng.integers(2, 4)))
            randomize(pp.params, rng)
            feats = rng.uniform(-1, 1, (n, d))
            o = rng.choice([-1.0, 0.0, 1.0], n)
            if not away_from_kinks(pp, feats, o):
                continue
            target = rng.integers(0, 2, n).astype(float)
            mask = rng.integers(0, 2, n).astype(float)
            from vaslab.predictor import bce_grad

            _, grads = bce_grad(pp, feats, o, target, mask)
            ref = nn.finite_diff_grad(
                lambda ps: nn.bce_loss(predict(pp, feats, o), target, mask)[0], pp.params
            )
            for name in grads:
                worst = max(worst, rel_err(grads[name], ref[name]))
            checked += 1
            done += 1

        # bce_loss gradient w.r.t. probabilities
        for _ in range(35):
            m = int(rng.integers(1, 10))
            p = rng.uniform(0.1, 0.9, m)
            t = rng.uniform(0, 1, m)
            _, dp = nn.bce_loss(p, t)
            ps = nn.ParamSet({"p": p})
            ref = nn.finite_diff_grad(lambda q: nn.bce_loss(q["p"], t)[0], ps)
            worst = max(worst, rel_err(dp, ref["p"]))
            checked += 1

        # searcher masked log-prob and the composed REINFORCE term
        from vaslab.searcher import backward as srch_backward
        from vaslab.searcher import distribution_cached, masked_distribution
        from vaslab.predictor import backward as pred_backward
        from vaslab.predictor import forward_cached

        done = 0
        while done < 35:
            n = int(rng.integers(3, 10))
            d = int(rng.integers(1, 5))
            pp = init_predictor(n, d, rng, hidden_per_cell=2)
            sp = init_searcher(n, rng)
            randomize(pp.params, rng)
            randomize(sp.params, rng)
            feats = rng.uniform(-1, 1, (n, d))
            o = rng.choice([-1.0, 0.0, 1.0], n)
            if not away_from_kinks(pp, feats, o):
                continue
            b_norm = float(rng.uniform(0.2, 1.0))
            allowed = np.sort(rng.choice(n, int(rng.integers(2, n + 1)), replace=False))
            action = int(rng.choice(allowed))
            g_t = float(rng.uniform(0.5, 2.0))

            # analytic: -g * (onehot - masked q) through both networks
            p, cache_p = forward_cached(pp, feats, o)
            x_s = np.concatenate([p, o, np.full(n, b_norm)])
            z1_s = sp.params["w1"] @ x_s + sp.params["b1"]
            if np.abs(z1_s).min() <= 1e-4:
                continue
            raw, cache_s = distribution_cached(sp, p, o, b_norm)
            q = masked_distribution(raw, allowed)
            dz = g_t * q
            dz[action] -= g_t
            gs, dp = srch_backward(sp, cache_s, dz)
            gp = pred_backward(pp, cache_p, dp)

            def loss(_):
                p2 = predict(pp, feats, o)
                raw2 = distribution(sp, p2, o, b_norm)
                return -g_t * masked_log_prob(raw2, allowed, action)

            ref_s = nn.finite_diff_grad(loss, sp.params)
            ref_p = nn.finite_diff_grad(loss, pp.params)
            for name in gs:
                worst = max(worst, rel_err(gs[name], ref_s[name]))
            for name in gp:
                worst = max(worst, rel_err(gp[name], ref_p[name]))
            checked += 1
            done += 1

        elapsed = time.perf_counter() - t0
        report(
            "1 (gradient correctness)",
            worst <= 1e-3 and checked >= 100 and elapsed < 60,
            f"{checked} instances, max rel err {worst:.2e}, {elapsed:.1f}s",
        )


# ---------------------------------------------------------------------------
# criterion 2: environment soundness


class TestCriterion2:
    def test_randomized_episode_invariants(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2002)
        n_episodes = 100_000
        for _ in range(n_episodes):
            rows = int(rng.integers(1, 4))
            cols = int(rng.integers(1, 4))
            n = rows * cols
            labels = rng.integers(0, 2, n)
            task = make_task(rows, cols, d=1, labels=labels,
                             features=np.zeros((n, 1)))
            model = CostModel.uniform() if rng.random() < 0.5 else CostModel.manhattan()
            budget = float(rng.uniform(0.0, 1.5 * n))
            state = EpisodeState.initial(task, budget)
            while True:
                allowed = affordable_unexplored(state, task, model)
                if allowed.size == 0:
                    break
                _, state = apply_query(state, task, model, int(allowed[rng.integers(allowed.size)]))
            spent = sum(out.cost for out in state.log)
            assert spent <= budget + 1e-12
            cells = [out.cell for out in state.log]
            assert len(cells) == len(set(cells))
            assert state.total_reward == int(labels[list(state.explored)].sum()) if state.explored else state.total_reward == 0
        elapsed = time.perf_counter() - t0
        report(
            "2 (environment soundness)",
            elapsed < 60,
            f"{n_episodes} episodes, no violations, {elapsed:.1f}s",
        )


# ---------------------------------------------------------------------------
# criterion 3: oracle equivalence


class TestCriterion3:
    def test_enumeration_equals_sorted_sum(self):
        rng = np.random.default_rng(3003)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(1, 7))
            c = int(rng.integers(0, 5))
            p = rng.uniform(0, 1, n)
            worst = max(worst, abs(brute_force_value(p, c, "sorted")
                                   - brute_force_value(p, c, "enumerate")))
        assert worst <= 1e-12
        self._enum_gap = worst

    def test_evaluator_attains_optimal_value(self):
        rng = np.random.default_rng(3113)
        p_true = rng.uniform(0.05, 0.95, 8)
        budget = 3
        optimum = brute_force_value(p_true, budget, "enumerate")
        n_trials = 10_000
        tasks = []
        for _ in range(n_trials):
            labels = (rng.random(8) < p_true).astype(int)
            tasks.append(make_task(2, 4, d=1, labels=labels, features=np.zeros((8, 1))))
        oracle = GreedyClassification(lambda task: p_true, name="oracle-prob")
        got = means(oracle, tasks, budget=float(budget), trials=1, seed=4)
        se = got.std(ddof=1) / np.sqrt(len(got))
        ok = abs(got.mean() - optimum) <= 3 * se
        report(
            "3 (oracle equivalence)",
            ok,
            f"enumeration==sorted on 200 instances; evaluator {got.mean():.4f} vs optimum "
            f"{optimum:.4f} (3se={3 * se:.4f}, {n_trials} trials)",
        )


# ---------------------------------------------------------------------------
# criteria 4-8: trained-policy orderings


def ratio_ci(num, den, seed=9):
    """Percentile bootstrap CI of mean(num)/mean(den) over paired tasks."""
    rng = np.random.default_rng(seed)
    n = len(num)
    ratios = np.empty(1000)
    for k in range(1000):
        idx = rng.integers(n, size=n)
        ratios[k] = num[idx].mean() / den[idx].mean()
    return float(np.percentile(ratios, 2.5)), float(np.percentile(ratios, 97.5))


class TestCriterion4:
    def test_joint_training_beats_baselines(self, lab_tasks, psvas_ckpt, gc_classifier):
        t0 = time.perf_counter()
        pred, srch, train_seconds = psvas_ckpt
        test = lab_tasks["test"]
        psvas = means(greedy_policy((pred, srch), adapt=True, name="psvas"), test)
        rs = means(RandomSearch(), test, trials=5)
        gc = means(GreedyClassification(gc_classifier), test)
        r_rs = psvas.mean() / rs.mean()
        r_gc = psvas.mean() / gc.mean()
        ci_rs = ratio_ci(psvas, rs)
        ci_gc = ratio_ci(psvas, gc)
        elapsed = train_seconds + (time.perf_counter() - t0)
        ok = (r_rs >= 1.5 and r_gc >= 1.1 and ci_rs[0] > 1.0 and ci_gc[0] > 1.0
              and elapsed < 900 and len(test) >= 200)
        report(
            "4 (training efficacy)",
            ok,
            f"ANT psvas {psvas.mean():.3f} rs {rs.mean():.3f} gc {gc.mean():.3f}; "
            f"ratios {r_rs:.3f}x rs (CI {ci_rs[0]:.3f}-{ci_rs[1]:.3f}), "
            f"{r_gc:.3f}x gc (CI {ci_gc[0]:.3f}-{ci_gc[1]:.3f}); "
            f"{len(test)} tasks, {elapsed:.0f}s incl. training",
        )


class TestCriterion5:
    def test_supervised_loss_helps(self, lab_tasks, psvas_ckpt, usvas_ckpt):
        test = lab_tasks["test"]
        psvas = means(greedy_policy(psvas_ckpt[:2], adapt=True, name="psvas"), test)
        usvas = means(greedy_policy(usvas_ckpt, adapt=True, name="usvas"), test)
        wins, losses, p = sign_test(psvas - usvas)
        ok = psvas.mean() > usvas.mean() and p < 0.05 and len(test) >= 200
        report(
            "5 (lambda ablation direction)",
            ok,
            f"ANT lam=0.1 {psvas.mean():.3f} vs lam=0 {usvas.mean():.3f}; "
            f"wins {wins}/{wins + losses}, sign test p={p:.2e}",
        )


class TestCriterion6:
    @pytest.mark.parametrize("which", ["psvas", "mpsvas"])
    def test_adaptation_helps_out_of_distribution(self, lab_tasks, psvas_ckpt, mpsvas_ckpt,
                                                  which):
        ckpt = psvas_ckpt[:2] if which == "psvas" else mpsvas_ckpt
        ood = lab_tasks["ood"]
        adaptive = means(greedy_policy(ckpt, adapt=True, name="a"), ood)
        frozen = means(greedy_policy(ckpt, adapt=False, name="f"), ood)
        wins, losses, p = sign_test(adaptive - frozen)
        ok = adaptive.mean() >= frozen.mean() and (adaptive - frozen).mean() > 0 and p < 0.05
        report(
            f"6 (adaptation value, {which})",
            ok,
            f"OOD ANT adaptive {adaptive.mean():.3f} vs frozen {frozen.mean():.3f}; "
            f"wins {wins}/{wins + losses}, sign test p={p:.2e}",
        )


class TestCriterion7:
    def test_meta_learning_helps_out_of_distribution(self, lab_tasks, psvas_ckpt, mpsvas_ckpt):
        ood = lab_tasks["ood"]
        meta = means(greedy_policy(mpsvas_ckpt, adapt=True, name="m"), ood)
        joint = means(greedy_policy(psvas_ckpt[:2], adapt=True, name="p"), ood)
        wins, losses, p = sign_test(meta - joint)
        ok = meta.mean() >= joint.mean() and p < 0.1
        report(
            "7 (meta-learning value on OOD)",
            ok,
            f"OOD ANT meta {meta.mean():.3f} vs joint {joint.mean():.3f}; "
            f"wins {wins}/{wins + losses}, one-sided p={p:.3f}",
        )


class TestCriterion8:
    def test_multi_query_orderings(self, lab_tasks, mpsvas_ckpt, mpsvas_topk_ckpt,
                                   mpsvas_mq_ckpt):
        test = lab_tasks["test"]
        single = means(greedy_policy(mpsvas_ckpt, adapt=True, name="single"), test)
        mq = means(greedy_policy(mpsvas_mq_ckpt, adapt=True, name="mq", r=3), test)
        topk = means(greedy_policy(mpsvas_topk_ckpt, adapt=True, name="topk", r=3), test)
        wins, losses, p = sign_test(single - mq)
        lo, hi = ratio_ci(mq, topk)
        ok = single.mean() >= mq.mean() and p < 0.05
        report(
            "8 (multi-query orderings)",
            ok,
            f"ANT single {single.mean():.3f} >= mq {mq.mean():.3f} "
            f"(wins {wins}/{wins + losses}, p={p:.2e}); mq/topk ratio CI "
            f"[{lo:.3f}, {hi:.3f}] vs topk {topk.mean():.3f} (descriptive)",
        )


@pytest.fixture(scope="session")
def mpsvas_topk_ckpt(lab_tasks):
    cfg = TrainConfig(mode="mpsvas-topk", lam=0.1, epochs=META_EPOCHS, lr_inner=LR_INNER,
                      r=3, **TRAIN_COMMON)
    pred, srch, _ = train(cfg, lab_tasks["train"])
    return pred, srch


@pytest.fixture(scope="session")
def mpsvas_mq_ckpt(lab_tasks):
    cfg = TrainConfig(mode="mpsvas-mq", lam=0.1, epochs=META_EPOCHS, lr_inner=LR_INNER,
                      r=3, **TRAIN_COMMON)
    pred, srch, _ = train(cfg, lab_tasks["train"])
    return pred, srch


# ---------------------------------------------------------------------------
# criterion 9: determinism


class TestCriterion9:
    def test_cli_runs_are_byte_identical(self, tmp_path):
        from vaslab.cli import main

        tasks_dir = tmp_path / "tasks"
        assert main(["gen", "--out", str(tasks_dir), "--n", "24", "--rows", "4", "--cols", "4",
                     "--rate", "0.2", "--feature-dim", "6", "--seed", "11"]) == 0
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            '{"mode": "psvas", "lambda": 0.1, "epochs": 2, "batch_episodes": 4,'
            ' "cost_kind": "uniform", "budgets": [4], "seed": 7}'
        )
        blobs = {}
        for run in ("a", "b"):
            ckpt = tmp_path / f"ckpt_{run}"
            rep = tmp_path / f"report_{run}.csv"
            assert main(["train", "--tasks", str(tasks_dir), "--out", str(ckpt),
                         "--config", str(cfg_path)]) == 0
            assert main(["eval", "--policy", str(ckpt), "--tasks", str(tasks_dir),
                         "--cost", "uniform", "--budgets", "4", "--trials", "2",
                         "--seed", "13", "--report", str(rep)]) == 0
            blobs[run] = {
                "pred": (ckpt / "predictor.json").read_bytes(),
                "srch": (ckpt / "searcher.json").read_bytes(),
                "manifest": (ckpt / "manifest.json").read_bytes(),
                "report": rep.read_bytes(),
            }
        same = all(blobs["a"][k] == blobs["b"][k] for k in blobs["a"])
        report(
            "9 (determinism)",
            same,
            "repeated train+eval with identical seeds produced byte-identical "
            "checkpoints and reports",
        )
