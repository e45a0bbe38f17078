"""Greedy hill-climbing structure search under temporal constraints.

In ``two_slice`` mode the only legal moves are additions and deletions of
slice0 -> slice1 arcs (reversal is never legal: a reversed arc would point
backward in time). Since the network score decomposes over targets, a move
only changes the local score of the arc's head, so the candidate deltas of
untouched targets survive between iterations.

``static_dag`` mode learns a classical one-slice DAG over each week's values
(add/delete/reverse with acyclicity checks); it exists to quantify how badly
a model without a time dimension mistakes feedback loops for one-way arcs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PanelDbnError, ValidationError
from .gaussian import LocalScorer, PenaltyConfig, SuffStats
from .graphs import StaticDag, TwoSliceGraph, has_path
from .panel import TransitionTable
from .rng import derived_rng

IMPROVEMENT_TOL = 1e-9
MODES = ("two_slice", "static_dag")


@dataclass(frozen=True)
class SearchOptions:
    """Knobs of the greedy search.

    Ties between equal-score moves break lexicographically on the (from, to)
    position in the condition order being searched, which is what makes a
    bootstrap's condition-order randomization actually vary the output.
    Restarts are off by default; when > 0 the search also runs from seeded
    random starting graphs and keeps the best local optimum.
    """

    max_parents: int | None = None
    tie_break: str = "index"
    seed: int = 0
    restarts: int = 0
    mode: str = "two_slice"

    def __post_init__(self) -> None:
        if self.restarts < 0:
            raise ValidationError("restarts must be >= 0")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.tie_break != "index":
            raise ValidationError(f"unknown tie_break rule {self.tie_break!r}")
        if self.max_parents is not None and self.max_parents < 0:
            raise ValidationError("max_parents must be >= 0 or None")


def hill_climb(
    data: TransitionTable,
    penalty: PenaltyConfig,
    opts: SearchOptions | None = None,
) -> TwoSliceGraph | StaticDag:
    """Greedy penalized-score search; stops when no single legal move improves
    the score by more than ``IMPROVEMENT_TOL``.

    Deterministic given (data, penalty, opts). Returns a ``TwoSliceGraph`` in
    ``two_slice`` mode and a ``StaticDag`` in ``static_dag`` mode (the latter
    scores each node against the other conditions of the same week, using the
    table's slice-1 rows as observations).
    """
    opts = opts or SearchOptions()
    if data.n_conditions == 0:
        raise ValidationError("no conditions to search over")
    if data.n_rows == 0:
        raise ValidationError("empty transition table")
    if opts.mode == "two_slice":
        scorer = LocalScorer(SuffStats.from_table(data), penalty)
        best_adj = _multi_start(scorer, data.n_conditions, opts, _climb_two_slice)
        arcs = frozenset(
            (data.conditions[i], data.conditions[j]) for i, j in zip(*np.nonzero(best_adj))
        )
        return TwoSliceGraph(conditions=data.conditions, arcs=arcs)
    scorer = LocalScorer(SuffStats(data.x1, data.x1), penalty)
    best_adj = _multi_start(scorer, data.n_conditions, opts, _climb_static)
    arcs = frozenset(
        (data.conditions[i], data.conditions[j]) for i, j in zip(*np.nonzero(best_adj))
    )
    return StaticDag(conditions=data.conditions, arcs=arcs)


def network_score(
    graph: TwoSliceGraph | StaticDag,
    data: TransitionTable,
    penalty: PenaltyConfig,
) -> float:
    """Sum of penalized local scores over all nodes of the graph."""
    if tuple(graph.conditions) != tuple(data.conditions):
        raise ValidationError("graph and data disagree on conditions")
    if isinstance(graph, TwoSliceGraph):
        scorer = LocalScorer(SuffStats.from_table(data), penalty)
    else:
        scorer = LocalScorer(SuffStats(data.x1, data.x1), penalty)
    index = {c: i for i, c in enumerate(data.conditions)}
    total = 0.0
    for c in data.conditions:
        parents = tuple(sorted(index[p] for p in graph.parents_of(c)))
        total += scorer.local_score(index[c], parents)
    return total


def _multi_start(scorer, n, opts, climb):
    best_score, best_adj = climb(scorer, n, opts, np.zeros((n, n), dtype=bool))
    for r in range(opts.restarts):
        rng = derived_rng(opts.seed, r)
        start = _random_start(rng, n, opts)
        score, adj = climb(scorer, n, opts, start)
        if score > best_score + IMPROVEMENT_TOL:
            best_score, best_adj = score, adj
    return best_adj


def _random_start(rng, n, opts) -> np.ndarray:
    if opts.mode == "two_slice":
        start = rng.random((n, n)) < 0.5
    else:
        # random topological order with forward arcs keeps the start acyclic
        order = rng.permutation(n)
        start = np.zeros((n, n), dtype=bool)
        for a in range(n):
            for b in range(a + 1, n):
                if rng.random() < 0.3:
                    start[order[a], order[b]] = True
    if opts.max_parents is not None:
        for j in range(n):
            extra = np.flatnonzero(start[:, j])
            if extra.size > opts.max_parents:
                start[extra[opts.max_parents :], j] = False
    return start


def _climb_two_slice(
    scorer: LocalScorer, n: int, opts: SearchOptions, start: np.ndarray
) -> tuple[float, np.ndarray]:
    adj = start.copy()
    parents: list[set[int]] = [set(np.flatnonzero(adj[:, j])) for j in range(n)]
    local = np.empty(n)
    for j in range(n):
        try:
            local[j] = scorer.local_score(j, tuple(sorted(parents[j])))
        except PanelDbnError:
            # infeasible random start for this node: fall back to no parents
            adj[:, j] = False
            parents[j] = set()
            local[j] = scorer.local_score(j, ())

    delta = np.full((n, n), -np.inf)

    def refresh(j: int) -> None:
        base = local[j]
        cur = parents[j]
        for i in range(n):
            toggled = cur ^ {i}
            if (
                opts.max_parents is not None
                and i not in cur
                and len(toggled) > opts.max_parents
            ):
                delta[i, j] = -np.inf
                continue
            try:
                delta[i, j] = scorer.local_score(j, tuple(sorted(toggled))) - base
            except PanelDbnError:
                delta[i, j] = -np.inf

    for j in range(n):
        refresh(j)

    while True:
        # np.argmax scans row-major, so the first maximum realizes the
        # lexicographic (from, to) tie-break
        flat = int(np.argmax(delta))
        i, j = divmod(flat, n)
        if not delta[i, j] > IMPROVEMENT_TOL:
            break
        adj[i, j] = not adj[i, j]
        parents[j] ^= {i}
        local[j] = scorer.local_score(j, tuple(sorted(parents[j])))
        refresh(j)

    return float(local.sum()), adj


def _climb_static(
    scorer: LocalScorer, n: int, opts: SearchOptions, start: np.ndarray
) -> tuple[float, np.ndarray]:
    adj = start.copy()
    np.fill_diagonal(adj, False)

    def parent_tuple(j: int, extra: int | None = None, minus: int | None = None):
        cur = set(np.flatnonzero(adj[:, j]))
        if extra is not None:
            cur.add(extra)
        if minus is not None:
            cur.discard(minus)
        return tuple(sorted(cur))

    def safe_score(j: int, parents: tuple[int, ...]) -> float | None:
        if opts.max_parents is not None and len(parents) > opts.max_parents:
            return None
        try:
            return scorer.local_score(j, parents)
        except PanelDbnError:
            return None

    local = np.array([scorer.local_score(j, parent_tuple(j)) for j in range(n)])

    while True:
        best_delta = IMPROVEMENT_TOL
        best_move = None
        arc_list = [(int(a), int(b)) for a, b in zip(*np.nonzero(adj))]
        arc_set = set(arc_list)
        # additions
        for i in range(n):
            for j in range(n):
                if i == j or (i, j) in arc_set:
                    continue
                if has_path(arc_set, j, i):
                    continue
                s = safe_score(j, parent_tuple(j, extra=i))
                if s is None:
                    continue
                d = s - local[j]
                if d > best_delta:
                    best_delta, best_move = d, ("add", i, j)
        # deletions
        for i, j in sorted(arc_set):
            s = safe_score(j, parent_tuple(j, minus=i))
            if s is None:
                continue
            d = s - local[j]
            if d > best_delta:
                best_delta, best_move = d, ("delete", i, j)
        # reversals
        for i, j in sorted(arc_set):
            without = arc_set - {(i, j)}
            if has_path(without, i, j):
                continue
            s_j = safe_score(j, parent_tuple(j, minus=i))
            s_i = safe_score(i, parent_tuple(i, extra=j))
            if s_j is None or s_i is None:
                continue
            d = (s_j - local[j]) + (s_i - local[i])
            if d > best_delta:
                best_delta, best_move = d, ("reverse", i, j)

        if best_move is None:
            break
        kind, i, j = best_move
        if kind == "add":
            adj[i, j] = True
        elif kind == "delete":
            adj[i, j] = False
        else:
            adj[i, j] = False
            adj[j, i] = True
            local[i] = scorer.local_score(i, parent_tuple(i))
        local[j] = scorer.local_score(j, parent_tuple(j))

    return float(local.sum()), adj
