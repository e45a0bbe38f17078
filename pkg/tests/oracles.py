"""Independent oracles used by tests: brute-force enumeration and grid scans.

These deliberately go through the public slow-path API (fit_node-based
scoring) or plain numpy, not through the search's sufficient-statistics fast
path, so they can catch that path's mistakes.
"""

from itertools import combinations, product

import numpy as np

from paneldbn import TwoSliceGraph, score_node


def all_two_slice_graphs(conditions):
    """Every legal two-slice arc set over the given conditions."""
    pairs = [(a, b) for a in conditions for b in conditions]
    for mask in product((False, True), repeat=len(pairs)):
        yield frozenset(p for p, keep in zip(pairs, mask) if keep)


def enumerate_best(table, penalty):
    """Brute-force exhaustive search: score every legal graph, return the
    best (score, graph). Local scores are memoized per (target, parent set)
    but every graph is scored."""
    conditions = table.conditions
    local = {}
    for target in conditions:
        for k in range(len(conditions) + 1):
            for parents in combinations(conditions, k):
                local[(target, parents)] = score_node(target, parents, table, penalty)
    best_score, best_arcs = -np.inf, None
    for arcs in all_two_slice_graphs(conditions):
        score = 0.0
        for target in conditions:
            parents = tuple(c for c in conditions if (c, target) in arcs)
            score += local[(target, parents)]
        if score > best_score:
            best_score, best_arcs = score, arcs
    return best_score, TwoSliceGraph(conditions=conditions, arcs=best_arcs)


def grid_threshold(strengths, grid=10_000):
    """Grid-scan threshold oracle mirroring the lowest-interval tie rule."""
    s = np.sort(np.asarray(strengths, dtype=float))
    ts = np.arange(1, grid + 1) / grid
    k = np.searchsorted(s, ts, side="left")  # count of strengths < t
    prefix = np.concatenate(([0.0], np.cumsum(s)))
    total = prefix[-1]
    costs = prefix[k] + (len(s) - k) - (total - prefix[k])
    best = costs.min()
    start = int(np.flatnonzero(costs <= best + 1e-12)[0])
    end = start
    while end + 1 < len(costs) and costs[end + 1] <= best + 1e-12:
        end += 1
    return (ts[start] + ts[end]) / 2.0
