"""Ground-truth model generation and sampling for recovery benchmarks.

A random two-slice network with known coefficients is sampled into a panel
shaped like the real data (counties with fixed baseline offsets, weekly
steps), the learning pipeline is run on it, and the learned graph is scored
against the truth. Dynamics are kept stationary by rescaling the implied VAR
coefficient matrix to spectral radius at most 0.95.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .analysis import DynamicBN
from .errors import InstabilityError, ValidationError
from .gaussian import GaussianNodeModel
from .graphs import NodeRef, TwoSliceGraph
from .panel import PanelDataset, RegionId
from .rng import derived_rng

MAX_SPECTRAL_RADIUS = 0.95
DIVERGENCE_LIMIT = 1e12
DEFAULT_START_WEEK = date(2020, 3, 2)
BURN_IN_WEEKS = 20


@dataclass(frozen=True)
class GroundTruthSpec:
    """Shape of a random ground-truth network.

    ``arcs_per_condition`` targets the expected number of cross arcs per
    condition; self arcs are always present. Cross-arc coefficients draw a
    magnitude from ``coefficient_range`` with a random sign, self arcs a
    positive magnitude from the same range.

    ``county_intercept_sd`` defaults to a modest 0.1: the learner regresses
    each county against its own past, which absorbs fixed baselines only
    approximately, and strong baselines re-introduce the spatial confounding
    that biases pooled partial coefficients.
    """

    n_conditions: int
    arcs_per_condition: float = 3.0
    coefficient_range: tuple[float, float] = (0.2, 0.6)
    noise_sd_range: tuple[float, float] = (0.3, 0.3)
    county_intercept_sd: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_conditions < 1:
            raise ValidationError("n_conditions must be >= 1")
        lo, hi = self.coefficient_range
        if not 0 <= lo <= hi:
            raise ValidationError("coefficient_range must be 0 <= lo <= hi")
        lo, hi = self.noise_sd_range
        if not 0 < lo <= hi:
            raise ValidationError("noise sd must be positive")
        max_cross = self.n_conditions * (self.n_conditions - 1)
        if not 0 <= self.arcs_per_condition * self.n_conditions <= max_cross + 0.5:
            raise ValidationError(
                f"arcs_per_condition {self.arcs_per_condition} infeasible for "
                f"{self.n_conditions} conditions"
            )


@dataclass
class RecoveryReport:
    """Precision/recall over cross arcs, feedback-pair recall, and SHD."""

    arc_precision: float
    arc_recall: float
    feedback_recall: float
    structural_hamming_distance: int


def random_dbn(spec: GroundTruthSpec) -> DynamicBN:
    """A seeded random dynamic network with stationary dynamics.

    Every condition keeps a self arc. Unordered condition pairs are included
    independently with the probability that hits the target cross-arc count
    in expectation; an included pair becomes a feedback loop with probability
    0.5, otherwise a single arc of uniform direction.
    """
    rng = derived_rng(spec.seed)
    n = spec.n_conditions
    conditions = tuple(f"C{i:02d}" for i in range(n))
    target_cross = spec.arcs_per_condition * n
    n_pairs = n * (n - 1) // 2
    arcs: set[tuple[int, int]] = {(i, i) for i in range(n)}
    if n_pairs:
        expected_per_pair = target_cross / n_pairs
        if expected_per_pair <= 1.5:
            q, p_feedback = expected_per_pair / 1.5, 0.5
        else:
            q, p_feedback = 1.0, expected_per_pair - 1.0
        for i in range(n):
            for j in range(i + 1, n):
                u_include, u_kind, u_dir = rng.random(3)
                if u_include >= q:
                    continue
                if u_kind < p_feedback:
                    arcs.add((i, j))
                    arcs.add((j, i))
                elif u_dir < 0.5:
                    arcs.add((i, j))
                else:
                    arcs.add((j, i))

    lo, hi = spec.coefficient_range
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i] = rng.uniform(lo, hi)
    for i, j in sorted(arcs):
        if i != j:
            a[j, i] = rng.uniform(lo, hi) * (1.0 if rng.random() < 0.5 else -1.0)
    radius = float(np.max(np.abs(np.linalg.eigvals(a))))
    if radius > MAX_SPECTRAL_RADIUS:
        a *= MAX_SPECTRAL_RADIUS / radius
    sd_lo, sd_hi = spec.noise_sd_range
    sigma = rng.uniform(sd_lo, sd_hi, size=n)

    graph = TwoSliceGraph(
        conditions=conditions,
        arcs=frozenset((conditions[i], conditions[j]) for i, j in arcs),
    )
    models: dict[str, GaussianNodeModel] = {}
    for j, target in enumerate(conditions):
        parent_idx = [i for i in range(n) if (i, j) in arcs]
        models[target] = GaussianNodeModel(
            target=NodeRef(target, 1),
            parents=tuple(NodeRef(conditions[i], 0) for i in parent_idx),
            intercept=0.0,
            coefficients=a[j, parent_idx].copy(),
            residual_variance=float(sigma[j] ** 2),
        )
    dbn = DynamicBN(graph=graph, node_models=models, conditions=conditions)
    dbn.validate()
    return dbn


def sample_panel(
    dbn: DynamicBN,
    n_counties: int,
    n_weeks: int,
    county_intercept_sd: float,
    seed: int = 0,
    n_states: int = 1,
    start_week: date = DEFAULT_START_WEEK,
    burn_in: int = BURN_IN_WEEKS,
) -> PanelDataset:
    """Sample a fully observed panel from a fitted network.

    Each county draws a fixed per-condition baseline offset; its intercept is
    adjusted so the county's stationary mean is the global one plus the
    offset. Trajectories start at that mean and run ``burn_in`` unrecorded
    weeks first. Each county consumes its own derived random stream, so the
    panel is reproducible county-by-county.
    """
    if n_weeks < 2:
        raise ValidationError("n_weeks must be >= 2")
    if n_counties < 1 or n_states < 1 or n_states > n_counties:
        raise ValidationError("need 1 <= n_states <= n_counties")
    if county_intercept_sd < 0:
        raise ValidationError("county_intercept_sd must be >= 0")
    a, mu, sigma2 = dbn.coefficient_matrix()
    if (sigma2 <= 0).any():
        raise ValidationError("all residual variances must be positive")
    k = len(dbn.conditions)
    eye = np.eye(k)
    stationary_mean = np.linalg.solve(eye - a, mu)
    sd = np.sqrt(sigma2)

    total = burn_in + n_weeks
    offsets = np.empty((n_counties, k))
    noise = np.empty((n_counties, total, k))
    for c in range(n_counties):
        rng = derived_rng(seed, c)
        offsets[c] = rng.normal(0.0, county_intercept_sd, size=k)
        noise[c] = rng.normal(size=(total, k)) * sd

    intercepts = mu + offsets @ (eye - a).T
    x = stationary_mean + offsets
    values = np.empty((n_counties, n_weeks, k))
    for t in range(total):
        x = intercepts + x @ a.T + noise[:, t, :]
        if not np.isfinite(x).all() or np.abs(x).max() > DIVERGENCE_LIMIT:
            raise InstabilityError(f"dynamics diverged at step {t}")
        if t >= burn_in:
            values[:, t - burn_in, :] = x

    regions = tuple(
        RegionId(state=f"S{c * n_states // n_counties:02d}", county=f"C{c:04d}")
        for c in range(n_counties)
    )
    weeks = tuple(start_week + timedelta(days=7 * t) for t in range(n_weeks))
    panel = PanelDataset(
        regions=regions, weeks=weeks, conditions=dbn.conditions, values=values
    )
    panel.validate()
    return panel


def score_recovery(truth: TwoSliceGraph, learned: TwoSliceGraph) -> RecoveryReport:
    """Compare a learned two-slice graph with a ground truth.

    Precision and recall are over cross arcs; feedback recall is the fraction
    of the truth's feedback pairs recovered with both directions; SHD counts
    the symmetric difference over all arcs including self loops. Vacuous
    ratios (no arcs to compare) report 1.0.
    """
    if set(truth.conditions) != set(learned.conditions):
        raise ValidationError("graphs disagree on conditions")
    t_cross = truth.cross_arcs()
    l_cross = learned.cross_arcs()
    tp = len(t_cross & l_cross)
    precision = tp / len(l_cross) if l_cross else 1.0
    recall = tp / len(t_cross) if t_cross else 1.0
    t_feedback = {
        (a, b) for a, b in t_cross if a < b and (b, a) in t_cross
    }
    recovered = sum(
        1 for a, b in t_feedback if (a, b) in l_cross and (b, a) in l_cross
    )
    feedback_recall = recovered / len(t_feedback) if t_feedback else 1.0
    shd = len(truth.arcs ^ learned.arcs)
    return RecoveryReport(
        arc_precision=precision,
        arc_recall=recall,
        feedback_recall=feedback_recall,
        structural_hamming_distance=shd,
    )
