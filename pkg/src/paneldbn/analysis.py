"""Analytics on fitted networks: parameters, explained variance, tuning.

The contribution of each parent to a node is measured by sequential (type-I)
explained variance: parents enter the regression in a fixed order (the
node's own lag first, then the rest by decreasing arc strength) and each is
credited with the drop in residual sum of squares it causes. Autocorrelation
is strong enough to dwarf everything else, so normalized shares exclude the
self term and divide by the variance explained by the other parents only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from .averaging import ArcStrengthTable, BootstrapSpec, bootstrap_strengths, consensus
from .errors import (
    InsufficientDataError,
    MissingDataError,
    PanelDbnError,
    ValidationError,
)
from .gaussian import GaussianNodeModel, PenaltyConfig, SuffStats, fit_node
from .graphs import FoldedGraph, StaticDag, TwoSliceGraph
from .panel import PanelDataset, TransitionTable, make_transition_table
from .rng import derived_rng
from .search import SearchOptions, hill_climb

DEFAULT_W_GRID = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
STATIC_CATEGORIES = ("correct", "feedback", "reversed", "spurious")


@dataclass
class DynamicBN:
    """A two-slice graph plus one fitted linear-Gaussian model per node.

    ``arc_strengths`` and ``threshold`` are carried along when the graph came
    out of bootstrap averaging; they order parents in variance decompositions
    and travel with the model when serialized.
    """

    graph: TwoSliceGraph
    node_models: dict[str, GaussianNodeModel]
    conditions: tuple[str, ...]
    arc_strengths: dict[tuple[str, str], float] | None = None
    threshold: float | None = None

    def validate(self) -> None:
        if set(self.node_models) != set(self.conditions):
            raise ValidationError("need exactly one node model per condition")
        for target, model in self.node_models.items():
            expected = self.graph.parents_of(target)
            got = tuple(p.condition for p in model.parents)
            if got != expected:
                raise ValidationError(
                    f"model parents {got} for {target} disagree with graph "
                    f"parents {expected}"
                )

    def coefficient_matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(A, mu, sigma2) with A[j, i] the weight of condition i on target j."""
        k = len(self.conditions)
        index = {c: i for i, c in enumerate(self.conditions)}
        a = np.zeros((k, k))
        mu = np.zeros(k)
        sigma2 = np.zeros(k)
        for j, target in enumerate(self.conditions):
            model = self.node_models[target]
            mu[j] = model.intercept
            sigma2[j] = model.residual_variance
            for parent, beta in zip(model.parents, model.coefficients):
                a[j, index[parent.condition]] = beta
        return a, mu, sigma2

    def predict(self, x0: np.ndarray) -> np.ndarray:
        """Conditional means of every condition given a (n, k) slice-0 matrix."""
        a, mu, _ = self.coefficient_matrix()
        return mu + x0 @ a.T

    def to_dict(self) -> dict:
        out = {
            "conditions": list(self.conditions),
            "graph": self.graph.to_dict(),
            "node_models": {
                target: model.to_dict()
                for target, model in sorted(self.node_models.items())
            },
        }
        if self.arc_strengths is not None:
            out["arc_strengths"] = [
                {"from": a, "to": b, "strength": s}
                for (a, b), s in sorted(self.arc_strengths.items())
                if s > 0
            ]
        if self.threshold is not None:
            out["threshold"] = self.threshold
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "DynamicBN":
        strengths = None
        if "arc_strengths" in data:
            strengths = {
                (e["from"], e["to"]): float(e["strength"])
                for e in data["arc_strengths"]
            }
        dbn = cls(
            graph=TwoSliceGraph.from_dict(data["graph"]),
            node_models={
                t: GaussianNodeModel.from_dict(m)
                for t, m in data["node_models"].items()
            },
            conditions=tuple(data["conditions"]),
            arc_strengths=strengths,
            threshold=data.get("threshold"),
        )
        dbn.validate()
        return dbn


@dataclass
class VarianceEntry:
    parent: str
    raw_share: float
    normalized_share: float


@dataclass
class VarianceDecomposition:
    """Sequential explained-variance shares of one node's parents.

    ``raw_share`` is against the node's total variance; ``normalized_share``
    is against the variance explained by the non-self parents (NaN for the
    self entry itself).
    """

    target: str
    entries: tuple[VarianceEntry, ...]
    self_excluded: bool


@dataclass
class TuneResult:
    w: float
    train_r2: float
    validation_r2: float
    arc_count: int


@dataclass
class ComponentShares:
    state_share: float
    county_share: float
    county_plus_ar_share: float


@dataclass
class VarianceComponents:
    per_condition: dict[str, ComponentShares]

    def averages(self) -> ComponentShares:
        rows = list(self.per_condition.values())
        return ComponentShares(
            state_share=float(np.mean([r.state_share for r in rows])),
            county_share=float(np.mean([r.county_share for r in rows])),
            county_plus_ar_share=float(
                np.mean([r.county_plus_ar_share for r in rows])
            ),
        )


@dataclass(frozen=True)
class StratumSpec:
    """Quartile strata of a condition's slice-0 values: ``low`` is the bottom
    quartile, ``average`` the middle two, ``high`` the top quartile; boundary
    values fall into the lower stratum."""

    stratifier: str


@dataclass
class StratifiedShares:
    target: str
    driver: str
    stratifier: str
    low: float
    average: float
    high: float
    unstratified: float


@dataclass
class StaticComparison:
    """How a static DAG's arcs relate to the folded dynamic graph."""

    counts: dict[str, int]
    proportions: dict[str, float]
    n_static_arcs: int


def fit_parameters(
    graph: TwoSliceGraph,
    data: TransitionTable,
    strengths: dict[tuple[str, str], float] | None = None,
    threshold: float | None = None,
) -> DynamicBN:
    """Maximum-likelihood fit of every node given the graph's parent sets."""
    if tuple(graph.conditions) != tuple(data.conditions):
        raise ValidationError("graph and data disagree on conditions")
    models: dict[str, GaussianNodeModel] = {}
    for target in data.conditions:
        try:
            models[target] = fit_node(target, graph.parents_of(target), data)
        except PanelDbnError as exc:
            raise type(exc)(f"node {target}: {exc}") from exc
    dbn = DynamicBN(
        graph=graph,
        node_models=models,
        conditions=data.conditions,
        arc_strengths=strengths,
        threshold=threshold,
    )
    dbn.validate()
    return dbn


def learn_consensus(
    data: TransitionTable,
    penalty: PenaltyConfig,
    opts: SearchOptions | None = None,
    spec: BootstrapSpec | None = None,
    n_jobs: int = 1,
) -> tuple[DynamicBN, ArcStrengthTable]:
    """The full averaged-learning pipeline: bootstrap strengths, threshold,
    consensus graph, then parameter fitting on the complete data."""
    table = bootstrap_strengths(data, penalty, opts=opts, spec=spec, n_jobs=n_jobs)
    graph = consensus(table)
    dbn = fit_parameters(
        data=data, graph=graph, strengths=table.strengths, threshold=table.threshold
    )
    return dbn, table


def r_squared(dbn: DynamicBN, data: TransitionTable, target: str) -> float:
    """1 - RSS/TSS of the fitted node model on the supplied transitions; TSS
    is taken around the supplied table's own target mean."""
    model = dbn.node_models.get(target)
    if model is None:
        raise ValidationError(f"no node model for {target!r}")
    t = data.condition_index(target)
    y = data.x1[:, t]
    tss = float(((y - y.mean()) ** 2).sum())
    if tss <= 0:
        raise ValidationError(f"R^2 undefined: {target} has zero variance")
    cols = [data.condition_index(p.condition) for p in model.parents]
    resid = y - model.predict(data.x0[:, cols])
    return 1.0 - float(resid @ resid) / tss


def _entry_order(dbn: DynamicBN, target: str, parents: Sequence[str]) -> list[str]:
    strengths = dbn.arc_strengths or {}
    others = [p for p in parents if p != target]
    others.sort(key=lambda p: (-strengths.get((p, target), 0.0), p))
    return ([target] if target in parents else []) + others


def _sequential_ss(
    stats: SuffStats, target_idx: int, cols: Sequence[int]
) -> tuple[list[float], float]:
    """Per-parent RSS drops for the given entry order, plus the target TSS."""
    _, rss_prev = stats.fit((), target_idx)
    tss = rss_prev
    drops: list[float] = []
    for k in range(1, len(cols) + 1):
        _, rss_k = stats.fit(tuple(cols[:k]), target_idx)
        drops.append(max(rss_prev - rss_k, 0.0))
        rss_prev = rss_k
    return drops, tss


def variance_decomposition(
    dbn: DynamicBN, data: TransitionTable, target: str
) -> VarianceDecomposition:
    """Apportion a node's explained variance among its parents (type-I ANOVA).

    The self lag enters first, remaining parents in decreasing arc-strength
    order (lexicographic on ties; plain lexicographic when the model carries
    no strengths). Raw shares are fractions of total variance and sum to the
    node's R^2; normalized shares exclude the self term.
    """
    parents = dbn.graph.parents_of(target)
    if not parents:
        raise ValidationError(f"{target} has no parents; nothing to decompose")
    order = _entry_order(dbn, target, parents)
    t = data.condition_index(target)
    stats = SuffStats(data.x0, data.x1)
    cols = [data.condition_index(p) for p in order]
    drops, tss = _sequential_ss(stats, t, cols)
    if tss <= 0:
        raise ValidationError(f"{target} has zero variance")
    nonself_total = sum(d for p, d in zip(order, drops) if p != target)
    entries = []
    for p, d in zip(order, drops):
        if p == target:
            normalized = math.nan
        else:
            normalized = d / nonself_total if nonself_total > 0 else math.nan
        entries.append(
            VarianceEntry(parent=p, raw_share=d / tss, normalized_share=normalized)
        )
    return VarianceDecomposition(
        target=target, entries=tuple(entries), self_excluded=target in parents
    )


def tune_penalty(
    panel: PanelDataset,
    split_week: int,
    w_grid: Sequence[float] | None = None,
    convention: str = "bic_half",
    opts: SearchOptions | None = None,
    n_jobs: int = 1,
) -> list[TuneResult]:
    """Structure-learn on the first ``split_week`` weeks for each penalty w and
    report average R^2 on the held-out transitions.

    Training uses only transitions whose both endpoints lie in the first
    ``split_week`` weeks; every later transition (including the one straddling
    the boundary, whose target week is unseen) goes to validation, so no
    target leaks across the split.
    """
    grid = tuple(w_grid) if w_grid is not None else DEFAULT_W_GRID
    if not 2 <= split_week <= panel.n_weeks - 2:
        raise ValidationError(
            f"split_week must leave >= 2 weeks on each side of {panel.n_weeks}"
        )
    table = make_transition_table(panel)
    train = table.take(np.flatnonzero(table.week1_index < split_week))
    validation = table.take(np.flatnonzero(table.week1_index >= split_week))
    if train.n_rows == 0 or validation.n_rows == 0:
        raise ValidationError("degenerate split: one side has no transitions")

    def one(w: float) -> TuneResult:
        graph = hill_climb(train, PenaltyConfig(w=w, convention=convention), opts)
        dbn = fit_parameters(graph, train)
        train_r2 = float(
            np.mean([r_squared(dbn, train, c) for c in panel.conditions])
        )
        val_r2 = float(
            np.mean([r_squared(dbn, validation, c) for c in panel.conditions])
        )
        return TuneResult(
            w=w, train_r2=train_r2, validation_r2=val_r2, arc_count=graph.n_arcs
        )

    return list(Parallel(n_jobs=n_jobs)(delayed(one)(w) for w in grid))


def _pooled_ar(z: np.ndarray) -> float:
    """Lag-1 coefficient pooled over rows of county-demeaned series."""
    den = float((z[:, :-1] ** 2).sum())
    if den <= 0:
        return 0.0
    return float((z[:, 1:] * z[:, :-1]).sum()) / den


def variance_components(panel: PanelDataset) -> VarianceComponents:
    """Method-of-moments share of each condition's variance explained by
    state grouping, county grouping, and county plus lag-1 autocorrelation."""
    if not panel.is_complete():
        raise MissingDataError("variance components require a complete panel")
    if panel.n_weeks < 3:
        raise ValidationError("need at least 3 weeks")
    states = [r.state for r in panel.regions]
    if len(set(states)) < 2:
        raise ValidationError("need at least 2 states")
    counts: dict[str, int] = {}
    for s in states:
        counts[s] = counts.get(s, 0) + 1
    if max(counts.values()) < 2:
        raise ValidationError("need at least one state with 2 or more counties")

    state_rows: dict[str, list[int]] = {}
    for i, s in enumerate(states):
        state_rows.setdefault(s, []).append(i)

    per_condition: dict[str, ComponentShares] = {}
    n_weeks = panel.n_weeks
    for j, condition in enumerate(panel.conditions):
        y = panel.values[:, :, j]
        grand = y.mean()
        ss_total = float(((y - grand) ** 2).sum())
        if ss_total <= 0:
            raise ValidationError(f"{condition} has zero variance")
        county_means = y.mean(axis=1)
        ss_county = float((n_weeks * (county_means - grand) ** 2).sum())
        ss_state = 0.0
        for rows in state_rows.values():
            m = y[rows].mean()
            ss_state += len(rows) * n_weeks * (m - grand) ** 2
        z = y - county_means[:, None]
        rho = _pooled_ar(z)
        # the first week has no lagged predictor; its residual is the demeaned
        # value itself, so the AR fit can only shrink the within-county sum
        ss_within = float((z**2).sum())
        sse = float((z[:, 0] ** 2).sum()) + float(
            ((z[:, 1:] - rho * z[:, :-1]) ** 2).sum()
        )
        ar_gain = max(ss_within - sse, 0.0)
        per_condition[condition] = ComponentShares(
            state_share=ss_state / ss_total,
            county_share=ss_county / ss_total,
            county_plus_ar_share=(ss_county + ar_gain) / ss_total,
        )
    return VarianceComponents(per_condition=per_condition)


def detrend(panel: PanelDataset) -> PanelDataset:
    """Remove the spatio-temporal structure: subtract county means, then take
    lag-1 autoregression residuals with a pooled per-condition coefficient.
    The first week is consumed by the lag."""
    if not panel.is_complete():
        raise MissingDataError("detrend requires a complete panel")
    if panel.n_weeks < 2:
        raise ValidationError("need at least 2 weeks to detrend")
    out = np.empty((panel.n_regions, panel.n_weeks - 1, panel.n_conditions))
    for j in range(panel.n_conditions):
        y = panel.values[:, :, j]
        z = y - y.mean(axis=1)[:, None]
        rho = _pooled_ar(z)
        out[:, :, j] = z[:, 1:] - rho * z[:, :-1]
    return PanelDataset(
        regions=panel.regions,
        weeks=panel.weeks[1:],
        conditions=panel.conditions,
        values=out,
    )


def compare_static(static: StaticDag, dynamic: FoldedGraph) -> StaticComparison:
    """Classify each static arc against the folded dynamic graph as correct,
    a collapsed feedback loop, reversed, or spurious."""
    if set(static.conditions) != set(dynamic.conditions):
        raise ValidationError("static and dynamic graphs disagree on conditions")
    feedback = dynamic.feedback_pairs()
    one_way = {
        (e.source, e.target) for e in dynamic.edges if e.kind == "one_way"
    }
    counts = {c: 0 for c in STATIC_CATEGORIES}
    for a, b in static.arcs:
        pair = (a, b) if a < b else (b, a)
        if pair in feedback:
            counts["feedback"] += 1
        elif (a, b) in one_way:
            counts["correct"] += 1
        elif (b, a) in one_way:
            counts["reversed"] += 1
        else:
            counts["spurious"] += 1
    n = len(static.arcs)
    proportions = {c: (counts[c] / n if n else 0.0) for c in STATIC_CATEGORIES}
    return StaticComparison(counts=counts, proportions=proportions, n_static_arcs=n)


def _driver_share(
    data: TransitionTable,
    rows: np.ndarray,
    target: str,
    driver: str,
    order: Sequence[str],
) -> float:
    stats = SuffStats(data.x0[rows], data.x1[rows])
    t = data.condition_index(target)
    cols = [data.condition_index(p) for p in order]
    drops, _ = _sequential_ss(stats, t, cols)
    nonself = sum(d for p, d in zip(order, drops) if p != target)
    if nonself <= 0:
        return math.nan
    return drops[list(order).index(driver)] / nonself


def _simulate_table(
    dbn: DynamicBN, data: TransitionTable, n_rows: int, seed: int
) -> TransitionTable:
    rng = derived_rng(seed)
    idx = rng.integers(0, data.n_rows, size=n_rows)
    x0 = data.x0[idx]
    _, _, sigma2 = dbn.coefficient_matrix()
    x1 = dbn.predict(x0) + rng.normal(size=(n_rows, len(dbn.conditions))) * np.sqrt(
        sigma2
    )
    return TransitionTable(
        conditions=data.conditions,
        x0=x0,
        x1=x1,
        region_index=data.region_index[idx],
        week1_index=data.week1_index[idx],
        regions=data.regions,
        weeks=data.weeks,
    )


def stratified_share(
    dbn: DynamicBN,
    data: TransitionTable,
    target: str,
    driver: str,
    stratum: StratumSpec,
    method: str = "regression",
    n_rows: int | None = None,
    seed: int = 0,
) -> StratifiedShares:
    """The driver's explained-variance share of the target within quartile
    strata of the stratifier's slice-0 values.

    ``method="regression"`` restricts the observed transitions to each
    stratum and re-runs the sequential decomposition there (deterministic).
    ``method="simulation"`` first resamples slice-0 rows and draws slice-1
    values from the fitted model, then stratifies the synthetic rows; use it
    as a sensitivity check.
    """
    if method not in ("regression", "simulation"):
        raise ValidationError(f"unknown method {method!r}")
    parents = dbn.graph.parents_of(target)
    if driver == target:
        raise ValidationError("driver must be a non-self parent of the target")
    if driver not in parents:
        raise ValidationError(f"{driver} is not a parent of {target}")
    order = _entry_order(dbn, target, parents)
    if method == "simulation":
        data = _simulate_table(dbn, data, n_rows or data.n_rows, seed)
    v = data.x0[:, data.condition_index(stratum.stratifier)]
    q1, q3 = np.quantile(v, [0.25, 0.75])
    masks = {
        "low": v <= q1,
        "average": (v > q1) & (v <= q3),
        "high": v > q3,
    }
    min_rows = len(parents) + 2
    shares: dict[str, float] = {}
    for name, mask in masks.items():
        rows = np.flatnonzero(mask)
        if rows.size < min_rows:
            raise InsufficientDataError(
                f"stratum {name!r} has {rows.size} rows; needs >= {min_rows}"
            )
        shares[name] = _driver_share(data, rows, target, driver, order)
    unstratified = _driver_share(
        data, np.arange(data.n_rows), target, driver, order
    )
    return StratifiedShares(
        target=target,
        driver=driver,
        stratifier=stratum.stratifier,
        low=shares["low"],
        average=shares["average"],
        high=shares["high"],
        unstratified=unstratified,
    )
