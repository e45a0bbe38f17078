"""Two-sided exponentially weighted moving-average imputation.

Each missing cell is filled from the originally observed values on either
side within a window, weighted by 2**(-distance). Imputation is single-pass:
filled values never feed later fills, so the result does not depend on the
order in which cells are processed and series can be imputed in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InsufficientDataError,
    MissingDataError,
    PlacementError,
    ValidationError,
)
from .panel import PanelDataset, RegionId
from .rng import derived_rng

PATTERNS = ("single", "batch4")
BATCH_LEN = 4


@dataclass(frozen=True)
class MissingnessSpec:
    """How to knock values out of a complete panel for evaluation.

    ``single`` masks independent cells; ``batch4`` masks disjoint runs of four
    consecutive weeks (a month of weekly data). ``fraction`` is the share of
    each series to mask.
    """

    pattern: str
    fraction: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pattern not in PATTERNS:
            raise ValidationError(f"pattern must be one of {PATTERNS}")
        if not 0.0 < self.fraction < 1.0:
            raise ValidationError("fraction must lie in (0, 1)")


@dataclass
class ImputationSummary:
    """What a panel-level imputation did."""

    n_imputed: int
    dropped_series: tuple[tuple[RegionId, str], ...]
    removed_regions: tuple[RegionId, ...]

    def to_dict(self) -> dict:
        return {
            "n_imputed": self.n_imputed,
            "dropped_series": [[str(r), c] for r, c in self.dropped_series],
            "removed_regions": [str(r) for r in self.removed_regions],
        }


@dataclass
class ImputationReport:
    """Accuracy of imputation against known truth on masked cells.

    Relative errors exclude cells whose true value is zero; those are counted
    in ``n_zero_truth_excluded`` instead of distorting the metric.
    """

    mean_relative_error: float
    per_condition_error: dict[str, float]
    n_imputed: int
    n_dropped_series: int
    n_zero_truth_excluded: int

    def to_dict(self) -> dict:
        return {
            "mean_relative_error": self.mean_relative_error,
            "per_condition_error": dict(self.per_condition_error),
            "n_imputed": self.n_imputed,
            "n_dropped_series": self.n_dropped_series,
            "n_zero_truth_excluded": self.n_zero_truth_excluded,
        }


def impute_ewma(series: Sequence[float] | np.ndarray, k: int = 4) -> np.ndarray:
    """Fill missing values of a 1-d series with a two-sided EWMA.

    For a missing position, observed neighbors within ``k`` steps on either
    side are averaged with weights 2**(-d); if none exist the window doubles
    until at least one is found. Only originally observed values contribute.
    A series with fewer than two observed values cannot be imputed.
    """
    if k < 1:
        raise ValidationError("window half-width k must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    observed = ~np.isnan(x)
    if int(observed.sum()) < 2:
        raise InsufficientDataError(
            "series has fewer than 2 observed values and cannot be imputed"
        )
    obs_idx = np.flatnonzero(observed)
    out = x.copy()
    for i in np.flatnonzero(~observed):
        window = k
        while True:
            sel = obs_idx[(obs_idx >= i - window) & (obs_idx <= i + window)]
            if sel.size:
                break
            window *= 2
        w = np.power(2.0, -np.abs(sel - i).astype(float))
        out[i] = float(w @ x[sel] / w.sum())
    return out


def impute_panel(
    panel: PanelDataset, k: int = 4
) -> tuple[PanelDataset, ImputationSummary]:
    """Impute every series of a panel; drop regions with un-imputable series.

    A (region, condition) series with fewer than two observed values is
    impossible to impute; it is recorded as dropped and its whole region is
    removed so the returned panel is fully observed.
    """
    panel.validate()
    values = panel.values
    dropped: list[tuple[RegionId, str]] = []
    for r in range(panel.n_regions):
        for c in range(panel.n_conditions):
            series = values[r, :, c]
            if np.isnan(series).any() and int((~np.isnan(series)).sum()) < 2:
                dropped.append((panel.regions[r], panel.conditions[c]))
    removed = tuple(sorted({region for region, _ in dropped}))
    removed_set = set(removed)
    keep = [i for i, region in enumerate(panel.regions) if region not in removed_set]
    if not keep:
        raise InsufficientDataError("every region has an un-imputable series")

    out = values[keep].copy()
    n_imputed = 0
    for r in range(out.shape[0]):
        for c in range(panel.n_conditions):
            series = out[r, :, c]
            gaps = np.isnan(series)
            if gaps.any():
                out[r, :, c] = impute_ewma(series, k=k)
                n_imputed += int(gaps.sum())
    imputed = PanelDataset(
        regions=tuple(panel.regions[i] for i in keep),
        weeks=panel.weeks,
        conditions=panel.conditions,
        values=out,
    )
    return imputed, ImputationSummary(
        n_imputed=n_imputed,
        dropped_series=tuple(dropped),
        removed_regions=removed,
    )


def inject_missing(
    panel: PanelDataset, spec: MissingnessSpec
) -> tuple[PanelDataset, np.ndarray]:
    """Deterministically mask a fraction of each series of a complete panel.

    Returns the masked panel and the boolean mask of removed cells. Each
    (region, condition) series gets its own derived seed, so masks are
    reproducible cell-for-cell regardless of panel slicing or parallelism.

    ``single`` masks round(fraction * weeks) cells per series. ``batch4``
    places disjoint four-week runs; when fraction * weeks / 4 is fractional,
    the per-series run count uses seeded randomized rounding so the overall
    fraction is met in expectation (exact counts when it divides evenly).
    """
    if not panel.is_complete():
        raise MissingDataError("panel must be fully observed before injection")
    n_weeks = panel.n_weeks
    if spec.pattern == "batch4":
        want_runs = spec.fraction * n_weeks / BATCH_LEN
        if want_runs > n_weeks // BATCH_LEN:
            raise PlacementError(
                f"cannot place {want_runs:.2f} disjoint runs of {BATCH_LEN} "
                f"in {n_weeks} weeks"
            )
    mask = np.zeros(panel.values.shape, dtype=bool)
    for r in range(panel.n_regions):
        for c in range(panel.n_conditions):
            rng = derived_rng(spec.seed, r, c)
            if spec.pattern == "single":
                m = int(round(spec.fraction * n_weeks))
                if m == 0:
                    continue
                pos = rng.choice(n_weeks, size=m, replace=False)
                mask[r, pos, c] = True
            else:
                want = spec.fraction * n_weeks / BATCH_LEN
                n_runs = int(want) + (rng.random() < want - int(want))
                if n_runs == 0:
                    continue
                free = n_weeks - (BATCH_LEN - 1) * n_runs
                picks = np.sort(rng.choice(free, size=n_runs, replace=False))
                starts = picks + (BATCH_LEN - 1) * np.arange(n_runs)
                for s in starts:
                    mask[r, s : s + BATCH_LEN, c] = True
    if not mask.any():
        raise ValidationError("fraction too small: no cell was masked in any series")
    out = panel.values.copy()
    out[mask] = np.nan
    masked = PanelDataset(
        regions=panel.regions,
        weeks=panel.weeks,
        conditions=panel.conditions,
        values=out,
    )
    return masked, mask


def evaluate_imputation(
    truth: PanelDataset, imputed: PanelDataset, mask: np.ndarray
) -> ImputationReport:
    """Relative imputation error over masked cells, against known truth.

    ``imputed`` may be missing whole regions (dropped during imputation);
    series belonging to those regions count as dropped, and their masked
    cells are excluded from both the error and ``n_imputed``.
    """
    if not truth.is_complete():
        raise ValidationError("truth panel must be fully observed")
    if mask.shape != truth.values.shape:
        raise ValidationError("mask shape does not match the truth panel")
    if imputed.conditions != truth.conditions or imputed.weeks != truth.weeks:
        raise ValidationError("imputed panel weeks/conditions disagree with truth")
    row_of = {region: i for i, region in enumerate(imputed.regions)}
    unknown = set(imputed.regions) - set(truth.regions)
    if unknown:
        raise ValidationError(f"imputed panel has regions absent from truth: {unknown}")

    n_conditions = truth.n_conditions
    n_dropped = 0
    abs_errors: list[np.ndarray] = []
    per_condition: dict[str, list[np.ndarray]] = {c: [] for c in truth.conditions}
    n_imputed = 0
    n_zero = 0
    for r, region in enumerate(truth.regions):
        i = row_of.get(region)
        if i is None:
            n_dropped += n_conditions
            continue
        for c in range(n_conditions):
            cells = mask[r, :, c]
            imp = imputed.values[i, :, c]
            if np.isnan(imp[cells]).any():
                n_dropped += 1
                continue
            n_imputed += int(cells.sum())
            tru = truth.values[r, :, c]
            nonzero = cells & (tru != 0)
            n_zero += int((cells & (tru == 0)).sum())
            if nonzero.any():
                err = np.abs(imp[nonzero] - tru[nonzero]) / np.abs(tru[nonzero])
                abs_errors.append(err)
                per_condition[truth.conditions[c]].append(err)

    pooled = np.concatenate(abs_errors) if abs_errors else np.empty(0)
    per_cond = {
        name: float(np.concatenate(chunks).mean())
        for name, chunks in per_condition.items()
        if chunks
    }
    return ImputationReport(
        mean_relative_error=float(pooled.mean()) if pooled.size else 0.0,
        per_condition_error=per_cond,
        n_imputed=n_imputed,
        n_dropped_series=n_dropped,
        n_zero_truth_excluded=n_zero,
    )
