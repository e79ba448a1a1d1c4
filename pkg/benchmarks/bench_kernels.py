"""Compiled kernels against their pure-Python/numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py            # kernel table + end-to-end rows
    python benchmarks/bench_kernels.py --quick    # fewer repeats

Kernel rows time both paths in one process: the fallback of a loop kernel
is its interpreted ``py_func`` or the vectorised numpy twin that
``SDDLAB_NO_NUMBA=1`` selects. End-to-end rows run a short routing-baseline
evaluation and a short training run twice, once per path, each in a fresh
interpreter because the switch is read at import time.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from sddlab import kernels
from sddlab._accel import USE_NUMBA


def best_of(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def search_args(rng, k):
    n = k + 2
    pts = rng.integers(0, 10, size=(n, 2))
    pts[-1] = pts[1]
    dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1).astype(np.float64)
    deadline = np.full(n, np.inf)
    deadline[2:-1] = rng.integers(20, 60, size=k - 1)
    deadline[-1] = 140.0
    needs = np.zeros(n, dtype=np.bool_)
    needs[2:-1] = rng.random(k - 1) < 0.5
    memo = (1 << k) * k
    return dict(
        dist=dist, deadline=deadline, needs_pickup=needs, p_local=1, start_time=1.0, service=1.0,
        travel_time=1.0, soft=False, use_memo=True,
        path=np.zeros(n, np.int64), cand=np.array([1] + [0] * (n - 1), np.int64), dist_at=np.zeros(n),
        time_at=np.array([1.0] + [0.0] * (n - 1)), late_at=np.zeros(n), mask_at=np.zeros(n, np.int64),
        depth_box=np.zeros(1, np.int64), best_path=np.zeros(n + 1, np.int64),
        best_val=np.array([np.inf, np.inf, 0.0]), memo_late=np.full(memo, np.inf),
        memo_dist=np.full(memo, np.inf), budget=10**12,
    )


def fresh(args):
    return {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in args.items()}


def kernel_rows(scale):
    rng = np.random.default_rng(0)
    rows = []

    xs = rng.integers(0, 10, 16)
    ys = rng.integers(0, 10, 16)
    n = 20_000 // scale
    rows.append(("insertion scan, 16 stops",
                 best_of(lambda: kernels._insertion_scan_loop(xs, ys, 3, 7), n),
                 best_of(lambda: kernels._insertion_scan_numpy(xs, ys, 3, 7), n)))

    args = search_args(rng, 8)
    rows.append(("sequence search, 8 stops",
                 best_of(lambda: kernels.sequence_search(**fresh(args)), 20 // scale or 1),
                 best_of(lambda: kernels.sequence_search.py_func(**fresh(args)), 1, repeat=3)))

    p = rng.standard_normal(256 * 256).astype(np.float32)
    g = rng.standard_normal(p.size).astype(np.float32)
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    n = 2_000 // scale
    rows.append(("Adam step, 65,536 parameters",
                 best_of(lambda: kernels._adam_loop(p, g, m, v, 1e-4, 0.9, 0.999, 1e-8), n),
                 best_of(lambda: kernels._adam_numpy(p, g, m, v, 1e-4, 0.9, 0.999, 1e-8), n)))

    widths = np.array([136, 256, 256, 128, 18], dtype=np.int64)
    flat = rng.standard_normal(sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))).astype(np.float32) * 0.05
    x = (rng.random((1, 136)) < 0.3).astype(np.float32)
    out = np.empty((1, 18), np.float32)
    n = 5_000 // scale
    rows.append(("Q-network forward, 1 row",
                 best_of(lambda: kernels._dense_rows_loop(flat, widths, x, out), n),
                 best_of(lambda: kernels._dense_rows_numpy(flat, widths, x, out), n)))
    return rows


def end_to_end(episodes):
    """Child-process body: one short baseline evaluation and one short training run."""
    from sddlab import harness
    from sddlab.learner import TrainerConfig, train

    spec = harness.preset("hom-10x10-30").with_policy("mip", eval_episodes=episodes)
    harness.run_evaluation(spec.with_policy("mip", eval_episodes=1, eval_seed=0))  # load compiled kernels
    start = time.perf_counter()
    harness.run_evaluation(spec)
    mip = (time.perf_counter() - start) / episodes

    scenario = harness.PRESETS["hom-5x5-5"]
    trainer = TrainerConfig(episodes=episodes * 4, warmup=200)
    train(scenario, TrainerConfig(episodes=1, warmup=10**9))  # load compiled kernels
    start = time.perf_counter()
    train(scenario, trainer)
    learn = (time.perf_counter() - start) / trainer.episodes
    print(json.dumps({"mip": mip, "train": learn}))


def run_child(disable, episodes):
    env = dict(os.environ, SDDLAB_NO_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, __file__, "--child", str(episodes)], env=env,
                         check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="fewer repeats and episodes")
    parser.add_argument("--child", type=int, default=None, help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.child is not None:
        end_to_end(args.child)
        return 0
    if not USE_NUMBA:
        print("SDDLAB_NO_NUMBA is set; unset it to compare against the compiled path", file=sys.stderr)
        return 2

    scale = 10 if args.quick else 1
    print(f"{'kernel':<32}{'compiled':>14}{'fallback':>14}{'speed-up':>10}")
    for name, fast, slow in kernel_rows(scale):
        print(f"{name:<32}{fast * 1e6:>11.1f} us{slow * 1e6:>11.1f} us{slow / fast:>9.1f}x")

    episodes = 2 if args.quick else 5
    compiled = run_child(False, episodes)
    fallback = run_child(True, episodes)
    print()
    print(f"{'end to end':<32}{'compiled':>14}{'fallback':>14}{'speed-up':>10}")
    for key, label in (("mip", "baseline episode, hom-10x10-30"), ("train", "training episode, hom-5x5-5")):
        print(f"{label:<32}{compiled[key]:>12.3f} s{fallback[key]:>12.3f} s{fallback[key] / compiled[key]:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
