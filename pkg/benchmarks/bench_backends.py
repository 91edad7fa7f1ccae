"""Times the episode-step kernels and a full training batch under each
available backend (compiled extension vs NumPy reference).

Usage: python benchmarks/bench_backends.py [--n 49] [--d 32] [--repeat 2000]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench_kernels(impl, n, d, h, repeat):
    rng = np.random.default_rng(0)
    w1 = rng.standard_normal((h, d + 1))
    b1 = np.zeros(h)
    w2 = rng.standard_normal((2 * n, n * h)) * 0.1
    b2 = np.zeros(2 * n)
    w3 = rng.standard_normal((n, 2 * n)) * 0.1
    b3 = np.zeros(n)
    x = rng.standard_normal((n, d + 1))
    sw1 = rng.standard_normal((2 * n, 3 * n)) * 0.1
    sb1 = np.zeros(2 * n)
    sw2 = rng.standard_normal((n, 2 * n)) * 0.1
    sb2 = np.zeros(n)
    sx = rng.standard_normal(3 * n)
    ds = rng.standard_normal(n)

    t0 = time.perf_counter()
    for _ in range(repeat):
        s, a1, a2 = impl.predictor_forward(w1, b1, w2, b2, w3, b3, x)
    t_pf = (time.perf_counter() - t0) / repeat

    t0 = time.perf_counter()
    for _ in range(repeat):
        impl.predictor_backward(w2, w3, x, a1, a2, s, ds)
    t_pb = (time.perf_counter() - t0) / repeat

    t0 = time.perf_counter()
    for _ in range(repeat):
        raw, sa1 = impl.searcher_forward(sw1, sb1, sw2, sb2, sx)
    t_sf = (time.perf_counter() - t0) / repeat

    t0 = time.perf_counter()
    for _ in range(repeat):
        impl.searcher_backward(sw1, sw2, sx, sa1, ds)
    t_sb = (time.perf_counter() - t0) / repeat

    return t_pf, t_pb, t_sf, t_sb


def bench_training(n_tasks=64, epochs=2):
    from vaslab.backend import backend_name
    from vaslab.env import GridDims
    from vaslab.taskgen import GenConfig, generate_tasks, with_direction
    from vaslab.training import TrainConfig, train

    cfg = with_direction(
        GenConfig(dims=GridDims(7, 7), feature_dim=32, target_rate=0.1, smoothing=1, seed=0),
        np.random.default_rng(0),
    )
    tasks = generate_tasks(cfg, n_tasks)
    tc = TrainConfig(mode="psvas", epochs=epochs, cost_kind="uniform", budgets=(15.0,),
                     seed=0, lr=1e-3, full_label_bce=True)
    t0 = time.perf_counter()
    train(tc, tasks)
    dt = time.perf_counter() - t0
    n_episodes = epochs * n_tasks
    print(f"  [{backend_name():>6}] full training loop: {dt:.2f}s "
          f"({1e3 * dt / n_episodes:.2f} ms/episode)")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=49)
    parser.add_argument("--d", type=int, default=32)
    parser.add_argument("--h", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=2000)
    parser.add_argument("--train-bench", action="store_true",
                        help="also time a full training loop per backend (re-execs)")
    args = parser.parse_args()

    from vaslab.backend import available_backends, get_impl

    names = available_backends()
    rows = {}
    for name in names:
        rows[name] = bench_kernels(get_impl(name), args.n, args.d, args.h, args.repeat)

    labels = ["predictor fwd", "predictor bwd", "searcher fwd", "searcher bwd"]
    print(f"kernel timings, N={args.n} D={args.d} h={args.h} ({args.repeat} reps):")
    header = f"{'kernel':>15}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for i, label in enumerate(labels):
        line = f"{label:>15}"
        for name in names:
            line += f"{1e6 * rows[name][i]:>10.1f}us"
        if len(names) == 2:
            line += f"{rows['python'][i] / rows['native'][i]:>9.1f}x"
        print(line)

    if args.train_bench:
        print("training-loop timing:")
        if "VASLAB_BACKEND" in os.environ:
            bench_training()
        else:
            for name in names:
                env = dict(os.environ, VASLAB_BACKEND=name)
                subprocess.run(
                    [sys.executable, "-c",
                     "from bench_backends import bench_training; bench_training()"],
                    cwd=os.path.dirname(os.path.abspath(__file__)), env=env, check=True,
                )


if __name__ == "__main__":
    main()
