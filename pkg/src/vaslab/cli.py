"""Command-line interface.

Subcommands: gen, train, eval, compare, ablate-lambda, dump-traj.
Exit codes: 0 success, 1 validation error, 2 I/O error. All randomness is
governed by --seed flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import taskgen, training
from .env import CostModel, GridDims
from .evaluation import (
    EvalReport,
    GreedyClassification,
    KnnActiveSearch,
    Policy,
    RandomSearch,
    VasPolicy,
    dump_trajectory,
    evaluate,
    write_report_csv,
)
from .predictor import load_predictor
from .taskgen import GenConfig, generate_tasks, load_taskset, save_taskset, shift_class, with_direction
from .training import TrainConfig, load_checkpoint, save_checkpoint, train, write_training_log


class _CliParser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep 1 for bad args
        raise ValueError(message)


def _add_cost_args(p):
    p.add_argument("--cost", choices=["uniform", "manhattan"], default="manhattan")
    p.add_argument("--initial-cost", type=float, default=None,
                   help="cost of the first query (default: 1 uniform, 0 manhattan)")
    p.add_argument("--budgets", default=None,
                   help="comma-separated budgets (default: 25,50,75 manhattan; 12,15,18 uniform)")


def _cost_model(args) -> CostModel:
    if args.initial_cost is not None:
        return CostModel(args.cost, args.initial_cost)
    return CostModel.uniform() if args.cost == "uniform" else CostModel.manhattan()


def _budgets(args) -> list[float]:
    if args.budgets:
        return [float(b) for b in str(args.budgets).split(",")]
    return list(training.DEFAULT_BUDGETS[args.cost])


def _bool_flag(value: str) -> bool:
    v = value.lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true/false, got {value!r}")


def _load_config(args) -> TrainConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = TrainConfig.from_jsonable(json.load(fh))
    else:
        cfg = TrainConfig()
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    cfg.__post_init__()
    return cfg


def cmd_gen(args) -> int:
    dims = GridDims(args.rows, args.cols)
    base = GenConfig(
        dims=dims,
        feature_dim=args.feature_dim,
        target_rate=args.rate,
        smoothing=args.smoothing,
        snr=args.snr,
        seed=args.seed,
    )
    base = with_direction(base, np.random.default_rng([args.seed, 10]))
    ood_cfg = shift_class(base, np.random.default_rng([args.seed, 11]))
    n_train = round(args.n * args.train_frac)
    n_test = round(args.n * args.test_frac)
    n_ood = args.n - n_train - n_test
    if min(n_train, n_test, n_ood) < 0:
        raise ValueError("split fractions exceed 1")
    splits = {
        "train": generate_tasks(base, n_train, seed_offset=0),
        "test": generate_tasks(base, n_test, seed_offset=n_train),
        "ood": generate_tasks(ood_cfg, n_ood, seed_offset=n_train + n_test),
    }
    save_taskset(args.out, splits)
    print(f"wrote {args.n} tasks ({n_train} train / {n_test} test / {n_ood} ood) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    tasks = load_taskset(args.tasks, split=args.split)
    if not tasks:
        raise ValueError(f"no tasks with split {args.split!r} in {args.tasks}")
    pred, srch, rows = train(cfg, tasks)
    save_checkpoint(args.out, pred, srch, cfg)
    write_training_log(rows, os.path.join(args.out, "training_log.csv"))
    last = rows[-1].mean_episode_reward if rows else float("nan")
    print(f"trained {cfg.mode} for {cfg.epochs} epochs; final batch mean reward {last:.3f}")
    return 0


def _policy_from_spec(spec: str, args) -> Policy:
    if spec == "random":
        return RandomSearch()
    if spec == "knn":
        return KnnActiveSearch()
    if spec.startswith("gc:"):
        pred = load_predictor(spec[3:])
        return GreedyClassification(pred)
    pred, srch, manifest = load_checkpoint(spec)
    cfg = TrainConfig.from_jsonable(manifest["config"])
    adapt = getattr(args, "adapt", True)
    name = f"{manifest['mode']}" + ("" if adapt else "-frozen")
    return VasPolicy(
        pred, srch,
        r=getattr(args, "r", None) or cfg.r,
        adapt=adapt,
        action_mode=getattr(args, "action_mode", "sample"),
        lr_inner=cfg.lr_inner,
        name=name,
    )


def cmd_eval(args) -> int:
    tasks = load_taskset(args.tasks, split=args.split)
    if not tasks:
        raise ValueError(f"no tasks with split {args.split!r} in {args.tasks}")
    policy = _policy_from_spec(args.policy, args)
    report = evaluate(
        policy, tasks, _cost_model(args), _budgets(args), trials=args.trials, seed=args.seed
    )
    write_report_csv([report], args.report)
    for row in report.rows:
        print(f"{policy.name} C={row.budget:g}: ANT {row.ant:.3f} "
              f"[{row.ci_lo:.3f}, {row.ci_hi:.3f}] over {row.n_tasks} tasks")
    return 0


def cmd_compare(args) -> int:
    tasks = load_taskset(args.tasks, split=args.split)
    if not tasks:
        raise ValueError(f"no tasks with split {args.split!r} in {args.tasks}")
    policies: list[Policy] = []
    for ckpt in (args.checkpoints.split(",") if args.checkpoints else []):
        policies.append(_policy_from_spec(ckpt, args))
    for name in (args.baselines.split(",") if args.baselines else []):
        if name == "random":
            policies.append(RandomSearch())
        elif name == "knn":
            policies.append(KnnActiveSearch())
        elif name == "gc":
            train_tasks = load_taskset(args.tasks, split="train")
            if not train_tasks:
                raise ValueError("gc baseline needs a train split to fit on")
            from .baselines import fit_classifier

            pred = fit_classifier(train_tasks, epochs=args.gc_epochs, seed=args.seed)
            policies.append(GreedyClassification(pred))
        else:
            raise ValueError(f"unknown baseline {name!r}")
    if not policies:
        raise ValueError("nothing to compare: give --checkpoints and/or --baselines")
    model = _cost_model(args)
    budgets = _budgets(args)
    reports = [
        evaluate(p, tasks, model, budgets, trials=args.trials, seed=args.seed) for p in policies
    ]
    write_report_csv(reports, args.report)
    for rep in reports:
        for row in rep.rows:
            print(f"{rep.policy:>16} C={row.budget:g}: ANT {row.ant:.3f} "
                  f"[{row.ci_lo:.3f}, {row.ci_hi:.3f}]")
    return 0


def cmd_ablate_lambda(args) -> int:
    cfg = _load_config(args)
    tasks = load_taskset(args.tasks, split="train")
    eval_tasks = load_taskset(args.tasks, split=args.split)
    if not tasks or not eval_tasks:
        raise ValueError("task set needs train and eval splits")
    lambdas = [float(v) for v in args.lambdas.split(",")]
    model = _cost_model(args)
    budgets = _budgets(args)
    eval_seed = args.seed if args.seed is not None else cfg.seed
    reports: list[EvalReport] = []
    for lam in lambdas:
        cfg_l = TrainConfig.from_jsonable({**cfg.to_jsonable(), "lambda": lam})
        pred, srch, _ = train(cfg_l, tasks)
        ckpt_dir = os.path.join(args.out, f"lambda_{lam:g}")
        save_checkpoint(ckpt_dir, pred, srch, cfg_l)
        policy = VasPolicy(pred, srch, r=cfg_l.r, adapt=True, lr_inner=cfg_l.lr_inner,
                           name=f"lambda={lam:g}")
        rep = evaluate(policy, eval_tasks, model, budgets, trials=args.trials, seed=eval_seed)
        reports.append(rep)
        for row in rep.rows:
            print(f"lambda={lam:g} C={row.budget:g}: ANT {row.ant:.3f}")
    write_report_csv(reports, os.path.join(args.out, "ablation.csv"))
    return 0


def cmd_dump_traj(args) -> int:
    tasks = load_taskset(args.tasks, split=args.split)
    if not 0 <= args.task_index < len(tasks):
        raise ValueError(f"task index {args.task_index} out of range (have {len(tasks)})")
    policy = _policy_from_spec(args.policy, args)
    if not isinstance(policy, VasPolicy):
        raise ValueError("dump-traj needs a trained checkpoint policy")
    rec = policy.run(tasks[args.task_index], args.budget, _cost_model(args),
                     np.random.default_rng([args.seed, args.task_index]))
    dump_trajectory(rec, args.out)
    print(f"wrote {sum(len(tr.cells) for tr in rec.transitions)} queries to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _CliParser(prog="vaslab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic task set")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rows", type=int, default=7)
    p.add_argument("--cols", type=int, default=7)
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--smoothing", type=int, default=1)
    p.add_argument("--snr", type=float, default=taskgen.DEFAULT_SNR)
    p.add_argument("--train-frac", type=float, default=0.6)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a search policy")
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON file mirroring TrainConfig fields")
    p.add_argument("--mode", choices=training.MODES, default=None)
    p.add_argument("--split", default="train")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one policy")
    p.add_argument("--policy", required=True,
                   help="checkpoint dir, 'random', 'knn', or 'gc:<predictor.json>'")
    p.add_argument("--tasks", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--adapt", type=_bool_flag, default=True)
    p.add_argument("--action-mode", choices=["sample", "greedy"], default="sample")
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_cost_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="evaluate several policies on one task set")
    p.add_argument("--checkpoints", default=None, help="comma-separated checkpoint dirs")
    p.add_argument("--baselines", default=None, help="comma-separated from {random,gc,knn}")
    p.add_argument("--tasks", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--adapt", type=_bool_flag, default=True)
    p.add_argument("--action-mode", choices=["sample", "greedy"], default="sample")
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gc-epochs", type=int, default=60)
    _add_cost_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate-lambda", help="train and evaluate across supervision weights")
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--mode", choices=training.MODES, default=None)
    p.add_argument("--lambdas", default="0,0.01,0.1,1.0")
    p.add_argument("--split", default="test")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)
    _add_cost_args(p)
    p.set_defaults(func=cmd_ablate_lambda)

    p = sub.add_parser("dump-traj", help="dump one episode as JSON")
    p.add_argument("--policy", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--task-index", type=int, default=0)
    p.add_argument("--split", default="test")
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--adapt", type=_bool_flag, default=True)
    p.add_argument("--action-mode", choices=["sample", "greedy"], default="sample")
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_cost_args(p)
    p.set_defaults(func=cmd_dump_traj)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
