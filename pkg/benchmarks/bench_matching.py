"""Benchmark the matching kernel: numba-compiled vs pure-Python fallback.

The kernel is the hot loop of agreement scoring (one run per document,
annotator pair, and level).  Sizes model densely annotated full-text
articles.  Run:

    python benchmarks/bench_matching.py

Selecting the fallback at runtime works the same way as in production:

    CORPUSFORGE_NO_NUMBA=1 corpusforge serve ...
"""

import random
import time

import numpy as np

from corpusforge.agreement.kernels import NO_EDGE, _min_cost_max_match_impl
from corpusforge.agreement.levels import achieved_level_matrix
from corpusforge.agreement.matching import _cost_matrix
from corpusforge.model import Annotation, Span

try:
    from numba import njit

    jitted = njit(cache=True)(_min_cost_max_match_impl)
    HAVE_NUMBA = True
except ImportError:
    jitted = None
    HAVE_NUMBA = False


def random_sets(rng, n, doc_len=40000):
    out = []
    for prefix in ("A", "B"):
        anns = []
        for i in range(n):
            start = rng.randrange(0, doc_len - 10)
            start -= start % rng.choice([1, 1, 5])  # cluster some starts
            anns.append(
                Annotation(
                    f"{prefix}{i}", Span(start, rng.randint(2, 10)), "x",
                    rng.choice(["GENE", "Disease", "Chemical"]),
                    rng.choice([None, "C:1", "C:2", "C:3"]),
                )
            )
        out.append(anns)
    return out


def build_cost(a, b, min_rank=0):
    achieved = achieved_level_matrix(a, b)
    starts_a = np.fromiter((x.span.start for x in a), np.int64, len(a))
    starts_b = np.fromiter((x.span.start for x in b), np.int64, len(b))
    return _cost_matrix(achieved, starts_a, starts_b, min_rank)


def time_kernel(kernel, costs, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for cost in costs:
            kernel(cost)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = random.Random(1)
    # Pure Python is O(minutes) beyond a few hundred annotations, which is
    # exactly why the jitted path exists; keep the comparison short.
    sizes = [30, 100, 250]
    instances = 3
    print(f"{'set size':>10} {'docs':>6} {'python':>12} {'numba':>12} {'speedup':>9}")
    for n in sizes:
        costs = []
        for _ in range(instances):
            a, b = random_sets(rng, n, doc_len=max(200, n * 12))
            costs.append(build_cost(a, b))
        if HAVE_NUMBA:
            jitted(costs[0])  # compile outside the timed region
        t_py = time_kernel(_min_cost_max_match_impl, costs, repeats=1)
        if HAVE_NUMBA:
            t_nb = time_kernel(jitted, costs, repeats=3)
            # same answers on both paths
            for cost in costs:
                assert np.array_equal(jitted(cost), _min_cost_max_match_impl(cost))
            print(f"{n:>10} {instances:>6} {t_py:>11.4f}s {t_nb:>11.4f}s {t_py / t_nb:>8.1f}x")
        else:
            print(f"{n:>10} {instances:>6} {t_py:>11.4f}s {'n/a':>12} {'n/a':>9}")


if __name__ == "__main__":
    main()
