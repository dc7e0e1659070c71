#!/usr/bin/env python3
"""Benchmark the batch exact-test kernels: compiled versus pure numpy.

Times the three support-producing batch kernels on simulation-scale
inputs and prints a table with the median wall time of each path and
the speedup. The compiled path is the numba one selected by default at
import; the reference path is the pure-numpy implementation that the
``DISCRETEFDR_DISABLE_NUMBA`` environment variable would select.

Run with ``python3 benchmarks/bench_kernels.py`` (options: ``--m`` for
the batch size, ``--repeat`` for timing repetitions).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from discretefdr import _kernels


def _time(fn, *args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def _inputs(m: int, rng: np.random.Generator):
    """Simulation-scale count data for the three kernels."""
    # two-Poisson pairs: moderate means, totals mostly below ~60
    theta = 7.0 * (1.0 + rng.pareto(7.0, size=m))
    bin_x1 = rng.poisson(theta).astype(np.int64)
    bin_x2 = rng.poisson(theta * rng.uniform(1.0, 3.0, size=m)).astype(
        np.int64
    )
    # two-binomial pairs with their per-group trial counts
    trials = (rng.negative_binomial(3, 3.0 / 11.0, size=m) + 2).astype(
        np.int64
    )
    p1 = rng.uniform(0.08, 0.65, size=m)
    fet_x1 = rng.binomial(trials, p1).astype(np.int64)
    fet_x2 = rng.binomial(trials, np.minimum(1.0, p1 * 1.5)).astype(np.int64)
    # two negative-binomial group sums (3 samples per group)
    mu = rng.uniform(0.5, 8.0, size=m)
    shape_total = 3.0 / 1.451
    ent_s1 = rng.negative_binomial(
        shape_total, shape_total / (shape_total + 3.0 * mu)
    ).astype(np.int64)
    ent_s2 = rng.negative_binomial(
        shape_total, shape_total / (shape_total + 3.0 * mu * 2.0)
    ).astype(np.int64)
    return {
        "binomial": ((bin_x1, bin_x2), (bin_x1, bin_x2)),
        "fisher": (
            (fet_x1, trials, fet_x2, trials),
            (fet_x1, trials, fet_x2, trials),
        ),
        "negbinom": (
            (ent_s1, ent_s2, shape_total),
            (ent_s1, ent_s2, shape_total),
        ),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m", type=int, default=20000,
                        help="features per batch (default 20000)")
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions, best is kept (default 5)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    data = _inputs(args.m, rng)
    compiled = {
        "binomial": _kernels.batch_binomial,
        "fisher": _kernels.batch_fisher,
        "negbinom": _kernels.batch_negbinom,
    }
    reference = {
        "binomial": _kernels.batch_binomial_numpy,
        "fisher": _kernels.batch_fisher_numpy,
        "negbinom": _kernels.batch_negbinom_numpy,
    }

    if _kernels.using_numba():
        _kernels.warm_up()  # pay JIT latency outside the timed region
        header = f"{'kernel':10s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}"
    else:
        print("note: compiled path disabled or unavailable; "
              "both columns run pure numpy")
        header = f"{'kernel':10s} {'dispatch':>10s} {'numpy':>10s} {'ratio':>8s}"

    print(f"batch size m = {args.m}, best of {args.repeat} runs")
    print(header)
    print("-" * len(header))
    for name in ("binomial", "fisher", "negbinom"):
        fast_args, ref_args = data[name]
        t_fast = _time(compiled[name], *fast_args, repeat=args.repeat)
        t_ref = _time(reference[name], *ref_args, repeat=args.repeat)
        print(
            f"{name:10s} {t_fast * 1e3:9.1f}ms {t_ref * 1e3:9.1f}ms "
            f"{t_ref / t_fast:7.1f}x"
        )

    # agreement spot check: identical outputs up to tiny float noise
    worst = 0.0
    for name in ("binomial", "fisher", "negbinom"):
        fast_args, ref_args = data[name]
        pv_fast = compiled[name](*fast_args)[0]
        pv_ref = reference[name](*ref_args)[0]
        worst = max(worst, float(np.abs(pv_fast - pv_ref).max()))
    print(f"max |p-value difference| between paths: {worst:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
