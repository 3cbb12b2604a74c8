"""Time each hot kernel under the numba and pure-numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--children 1400]

Both backends are imported directly, so the RIBBONREC_NUMBA flag does not
matter here. The first numba call is made before timing (JIT warm-up).
"""
import argparse
import timeit

import numpy as np

from ribbonrec.kernels import _numba, _numpy


def cases(n_children: int, n_apps: int, rng):
    ages = rng.integers(2, 11, size=n_children).astype(np.int64)
    intensive = rng.random((n_children, n_apps)) < 0.15
    played = rng.random((n_children, n_apps)) < 0.4
    sims = rng.uniform(0.5, 1.0, size=100)
    counts = rng.integers(0, 40, size=(100, n_apps)).astype(np.int64)
    samples = rng.standard_normal((2000, 100))
    ranks = np.arange(2, 2 * 40 + 1, 2, dtype=np.int64)
    return {
        "similarity_row (all targets)": lambda m: [m.similarity_row(t, ages, intensive, 0.4, 0.6)
                                                   for t in range(0, n_children, 10)],
        "common_played (all targets)": lambda m: [m.common_played(played, t) for t in range(0, n_children, 10)],
        "interest_scores": lambda m: m.interest_scores(sims, counts),
        "lilliefors_stats 2000x100": lambda m: m.lilliefors_stats(samples),
        "rank_sum_counts 40 choose 20": lambda m: m.rank_sum_counts(ranks, 20),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--children", type=int, default=1400)
    ap.add_argument("--apps", type=int, default=90)
    args = ap.parse_args()
    table = cases(args.children, args.apps, np.random.default_rng(0))
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in table.items():
        fn(_numba)  # compile
        t_np = min(timeit.repeat(lambda: fn(_numpy), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn(_numba), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t_np:10.2f} {t_nb:10.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
