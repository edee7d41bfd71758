"""Time the compiled scheduler kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py --sizes 100 1000 10000 --repeat 5
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from curriculum_sched import _pykernels

try:
    from curriculum_sched import _kernels
except ImportError:  # extension not built
    _kernels = None


def cases(n: int, rng: np.random.Generator):
    p = rng.random(n) ** 2
    p /= p.sum()
    u = rng.random(n)
    counts = rng.integers(0, 5, n).astype(np.float64)
    return {
        "categorical_draws": lambda mod: mod.categorical_draws(p, u),
        "weighted_permutation": lambda mod: mod.weighted_permutation(p, u),
        "decay_probabilities": lambda mod: mod.decay_probabilities(p, counts, 10.0, 700.0),
    }


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 1_000, 10_000, 100_000])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<22}{'N':>8}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for n in args.sizes:
        for name, call in cases(n, rng).items():
            py = best_time(lambda: call(_pykernels), args.repeat) * 1e3
            if _kernels is None:
                print(f"{name:<22}{n:>8}{py:>14.3f}{'n/a':>14}{'n/a':>10}")
                continue
            cy = best_time(lambda: call(_kernels), args.repeat) * 1e3
            print(f"{name:<22}{n:>8}{py:>14.3f}{cy:>14.4f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
