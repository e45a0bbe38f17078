"""Bootstrap model averaging: arc strengths, threshold, consensus graph.

Structure search on a single dataset happily includes arcs supported by
noise; learning one graph per bootstrap resample and keeping only the arcs
that recur turns arc inclusion into a frequency ("strength") in [0, 1]. The
significance threshold is not hand-picked: it is the cut point that best
binarizes the observed strength distribution in the L1 sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import IO, Sequence

import numpy as np
from joblib import Parallel, delayed

from .errors import AggregateError, PanelDbnError, ValidationError
from .gaussian import PenaltyConfig
from .graphs import StaticDag, TwoSliceGraph, has_path
from .panel import TransitionTable
from .rng import derive_seed
from .search import SearchOptions, hill_climb


@dataclass(frozen=True)
class BootstrapSpec:
    """Bootstrap protocol: B resamples at 75% size with shuffled variable order."""

    replicates: int = 500
    sample_fraction: float = 0.75
    randomize_order: bool = True
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValidationError("sample_fraction must lie in (0, 1]")


@dataclass
class ArcStrengthTable:
    """Bootstrap inclusion frequency per directed arc, plus the threshold."""

    conditions: tuple[str, ...]
    strengths: dict[tuple[str, str], float]
    threshold: float
    replicates: int
    n_failed: int = 0
    replicate_arcs: tuple[frozenset[tuple[str, str]], ...] | None = None

    def strength(self, from_condition: str, to_condition: str) -> float:
        return self.strengths.get((from_condition, to_condition), 0.0)

    def nonzero(self) -> list[tuple[str, str, float]]:
        """(from, to, strength) for arcs seen at least once, strongest first."""
        rows = [(a, b, s) for (a, b), s in self.strengths.items() if s > 0]
        rows.sort(key=lambda r: (-r[2], r[0], r[1]))
        return rows

    def write_csv(self, target: IO[str]) -> None:
        target.write("from,to,strength\n")
        for a, b, s in self.nonzero():
            target.write(f"{a},{b},{s!r}\n")

    def metadata(self) -> dict:
        return {
            "threshold": self.threshold,
            "replicates": self.replicates,
            "n_failed": self.n_failed,
        }


def estimate_threshold(strengths: Sequence[float]) -> float:
    """L1-optimal cut point that binarizes a strength distribution.

    For a candidate threshold t, every strength below t ideally would have
    been 0 and every strength at or above it 1; the cost of t is the total
    distance to that ideal. The cost is piecewise constant between observed
    values, so only the intervals between consecutive distinct strengths
    (plus the two boundary intervals) need checking. Ties pick the lowest
    optimal interval, and the returned threshold is its midpoint.
    """
    values = np.asarray(list(strengths), dtype=float)
    if values.size == 0:
        raise ValidationError("cannot estimate a threshold from no strengths")
    if np.isnan(values).any() or (values < 0).any() or (values > 1).any():
        raise ValidationError("strengths must lie in [0, 1]")
    uniq = np.unique(values)
    lows = np.concatenate(([0.0], uniq))
    highs = np.concatenate((uniq, [1.0]))
    best_cost = math.inf
    best_mid = None
    for lo, hi in zip(lows, highs):
        if not lo < hi:
            continue
        below = values[values <= lo]
        above = values[values > lo]
        cost = float(below.sum() + (1.0 - above).sum())
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_mid = (lo + hi) / 2.0
    assert best_mid is not None
    return best_mid


def _replicate_arcs(
    data: TransitionTable,
    penalty: PenaltyConfig,
    opts: SearchOptions,
    spec: BootstrapSpec,
    b: int,
) -> frozenset[tuple[str, str]] | None:
    rng = np.random.default_rng(derive_seed(spec.master_seed, b))
    n = data.n_rows
    m = math.ceil(spec.sample_fraction * n)
    sample = data.take(rng.integers(0, n, size=m))
    if spec.randomize_order:
        sample = sample.permute_conditions(rng.permutation(data.n_conditions))
    try:
        graph = hill_climb(
            sample, penalty, replace(opts, seed=derive_seed(spec.master_seed, b, 1))
        )
    except PanelDbnError:
        return None
    return frozenset(graph.arcs)


def bootstrap_strengths(
    data: TransitionTable,
    penalty: PenaltyConfig,
    opts: SearchOptions | None = None,
    spec: BootstrapSpec | None = None,
    n_jobs: int = 1,
    keep_replicates: bool = False,
) -> ArcStrengthTable:
    """Learn one graph per bootstrap resample and count arc inclusion.

    Each replicate resamples ceil(sample_fraction * n) rows with replacement
    and, by default, permutes the condition order seen by the search so that
    tie-breaking does not systematically favor the same arcs. Per-replicate
    seeds are derived from (master_seed, replicate), so the result does not
    depend on ``n_jobs``. Replicates whose search fails are dropped from the
    denominator; more than 10% failures aborts.
    """
    if data.n_rows == 0:
        raise ValidationError("empty transition table")
    opts = opts or SearchOptions()
    spec = spec or BootstrapSpec()
    runner = Parallel(n_jobs=n_jobs)
    results = runner(
        delayed(_replicate_arcs)(data, penalty, opts, spec, b)
        for b in range(spec.replicates)
    )
    kept = [r for r in results if r is not None]
    n_failed = spec.replicates - len(kept)
    if n_failed > 0.1 * spec.replicates:
        raise AggregateError(
            f"{n_failed} of {spec.replicates} bootstrap replicates failed"
        )
    counts: dict[tuple[str, str], int] = {}
    for arcs in kept:
        for arc in arcs:
            counts[arc] = counts.get(arc, 0) + 1
    denom = len(kept)
    strengths = {
        (a, b): counts.get((a, b), 0) / denom
        for a in data.conditions
        for b in data.conditions
    }
    threshold = estimate_threshold(list(strengths.values()))
    return ArcStrengthTable(
        conditions=data.conditions,
        strengths=strengths,
        threshold=threshold,
        replicates=denom,
        n_failed=n_failed,
        replicate_arcs=tuple(kept) if keep_replicates else None,
    )


def consensus(
    table: ArcStrengthTable, mode: str = "two_slice"
) -> TwoSliceGraph | StaticDag:
    """Graph of the arcs whose strength exceeds the estimated threshold.

    Arcs enter in decreasing strength (ties lexicographic). In static mode an
    arc that would close a directed cycle is discarded; in two-slice mode
    every arc crosses slices forward, so no cycle can arise and both
    directions of a strong pair are kept, forming a feedback loop once folded.
    """
    if mode not in ("two_slice", "static_dag"):
        raise ValidationError(f"unknown consensus mode {mode!r}")
    candidates = [
        (a, b, s) for (a, b), s in table.strengths.items() if s > table.threshold
    ]
    candidates.sort(key=lambda r: (-r[2], r[0], r[1]))
    if mode == "two_slice":
        arcs = frozenset((a, b) for a, b, _ in candidates)
        return TwoSliceGraph(conditions=table.conditions, arcs=arcs)
    kept: set[tuple[str, str]] = set()
    for a, b, _ in candidates:
        if a == b or has_path(kept, b, a):
            continue
        kept.add((a, b))
    return StaticDag(conditions=table.conditions, arcs=frozenset(kept))
