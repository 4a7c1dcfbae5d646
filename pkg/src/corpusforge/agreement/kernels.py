"""Minimum-cost maximum-cardinality bipartite matching kernel.

This is the hot loop of agreement scoring: one call per (document,
annotator pair, level), with side sizes up to the annotation count of a
full-text article.  The kernel is compiled with numba when available;
setting CORPUSFORGE_NO_NUMBA=1 selects the pure-Python fallback (same
function, interpreted).  benchmarks/bench_matching.py compares the two.

Algorithm: successive shortest augmenting paths over the residual graph,
shortest paths by SPFA (costs on backward edges are negative, so Dijkstra
does not apply without potentials).  Augmenting along a shortest path at
every step keeps the matching extreme, i.e. minimum-cost among all
matchings of its cardinality, so the final result is a minimum-cost
matching among all maximum-cardinality ones.

Cost matrices use NO_EDGE (-1) for forbidden pairs and non-negative
int64 costs otherwise.
"""

from __future__ import annotations

import os

import numpy as np

NO_EDGE = -1
_INF = np.iinfo(np.int64).max // 4


def _min_cost_max_match_impl(cost):  # pragma: no cover - exercised via wrappers
    n_a, n_b = cost.shape
    match_a = np.full(n_a, -1, np.int64)
    match_b = np.full(n_b, -1, np.int64)
    if n_a == 0 or n_b == 0:
        return match_a

    n = n_a + n_b
    dist = np.empty(n, np.int64)
    parent = np.empty(n, np.int64)
    in_queue = np.empty(n, np.bool_)
    queue = np.empty(n + 1, np.int64)  # circular; in_queue bounds occupancy

    while True:
        for v in range(n):
            dist[v] = _INF
            parent[v] = -1
            in_queue[v] = False
        head = 0
        tail = 0
        for i in range(n_a):
            if match_a[i] == -1:
                dist[i] = 0
                queue[tail] = i
                tail = (tail + 1) % (n + 1)
                in_queue[i] = True

        while head != tail:
            u = queue[head]
            head = (head + 1) % (n + 1)
            in_queue[u] = False
            du = dist[u]
            if u < n_a:
                for j in range(n_b):
                    c = cost[u, j]
                    if c < 0 or match_a[u] == j:
                        continue
                    v = n_a + j
                    nd = du + c
                    if nd < dist[v]:
                        dist[v] = nd
                        parent[v] = u
                        if not in_queue[v]:
                            queue[tail] = v
                            tail = (tail + 1) % (n + 1)
                            in_queue[v] = True
            else:
                j = u - n_a
                i = match_b[j]
                if i >= 0:
                    nd = du - cost[i, j]
                    if nd < dist[i]:
                        dist[i] = nd
                        parent[i] = u
                        if not in_queue[i]:
                            queue[tail] = i
                            tail = (tail + 1) % (n + 1)
                            in_queue[i] = True

        best_j = -1
        best_d = _INF
        for j in range(n_b):
            if match_b[j] == -1 and dist[n_a + j] < best_d:
                best_d = dist[n_a + j]
                best_j = j
        if best_j == -1:
            return match_a

        v = n_a + best_j
        while True:
            u = parent[v]
            j = v - n_a
            match_a[u] = j
            match_b[j] = u
            v = parent[u]
            if v == -1:
                break


def _use_numba() -> bool:
    return os.environ.get("CORPUSFORGE_NO_NUMBA", "").lower() not in ("1", "true", "yes")


MATCHING_BACKEND = "python"
min_cost_max_match = _min_cost_max_match_impl

if _use_numba():
    try:
        from numba import njit

        min_cost_max_match = njit(cache=True)(_min_cost_max_match_impl)
        MATCHING_BACKEND = "numba"
    except ImportError:
        pass


def matching_backend() -> str:
    """Which implementation of the kernel is active ("numba" or "python")."""
    return MATCHING_BACKEND
