"""Panel data model: loading, validation, reshaping, and the transition table.

The expected CSV layout is ``date,state_code,county_code,<value columns...>``
with ISO week-start dates and empty cells for missing values. A condition
mapping aggregates raw value columns into named conditions; without one,
every value column becomes a condition of its own (identity mapping), which
is how files written by :func:`save_panel` round-trip.

All functions here are pure: inputs are never mutated, so everything is safe
to call from multiple threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    InsufficientDataError,
    MissingDataError,
    ParseError,
    ValidationError,
)

WEEK = timedelta(days=7)
KEY_COLUMNS = ("date", "state_code", "county_code")


@dataclass(frozen=True, order=True)
class RegionId:
    """A county within a state; sorts lexicographically by (state, county)."""

    state: str
    county: str

    def __str__(self) -> str:
        return f"{self.state}:{self.county}"


@dataclass
class PanelDataset:
    """Weekly region x condition panel with NaN marking missing values.

    ``values`` has shape (n_regions, n_weeks, n_conditions). A week whose
    values are missing for every condition of a region counts as not covered
    by that region (e.g. the source file had no row for it); a week observed
    for some conditions but not others is genuinely partial.

    Values are search-style frequencies and must be nonnegative when loaded
    from files; panels produced by the simulator are unconstrained reals.
    """

    regions: tuple[RegionId, ...]
    weeks: tuple[date, ...]
    conditions: tuple[str, ...]
    values: np.ndarray

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)

    @property
    def n_conditions(self) -> int:
        return len(self.conditions)

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def is_complete(self) -> bool:
        return not np.isnan(self.values).any()

    def condition_index(self, condition: str) -> int:
        try:
            return self.conditions.index(condition)
        except ValueError:
            raise ValidationError(f"unknown condition {condition!r}") from None

    def missing_fraction(self, condition: str) -> float:
        j = self.condition_index(condition)
        col = self.values[:, :, j]
        return float(np.isnan(col).mean()) if col.size else 0.0

    def states(self) -> tuple[str, ...]:
        return tuple(sorted({r.state for r in self.regions}))

    def validate(self, require_nonnegative: bool = False) -> None:
        """Check structural invariants; raises ValidationError on violation."""
        if self.values.shape != (self.n_regions, self.n_weeks, self.n_conditions):
            raise ValidationError(
                f"values shape {self.values.shape} does not match "
                f"{(self.n_regions, self.n_weeks, self.n_conditions)}"
            )
        if len(set(self.regions)) != self.n_regions:
            raise ValidationError("duplicate regions")
        if len(set(self.conditions)) != self.n_conditions:
            raise ValidationError("duplicate conditions")
        for prev, cur in zip(self.weeks, self.weeks[1:]):
            if cur - prev != WEEK:
                raise ValidationError(
                    f"weeks must be strictly increasing and 7 days apart; "
                    f"got {prev} then {cur}"
                )
        if require_nonnegative:
            with np.errstate(invalid="ignore"):
                if bool((self.values < 0).any()):
                    raise ValidationError("negative values present")


@dataclass(frozen=True)
class ConditionMapping:
    """Ordered mapping from condition name to the raw columns it aggregates."""

    entries: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        seen_conditions: set[str] = set()
        seen_raw: set[str] = set()
        for condition, raw_cols in self.entries:
            if condition in seen_conditions:
                raise ConfigurationError(f"condition {condition!r} mapped twice")
            seen_conditions.add(condition)
            if not raw_cols:
                raise ConfigurationError(f"condition {condition!r} maps to no columns")
            for col in raw_cols:
                if col in seen_raw:
                    raise ConfigurationError(
                        f"raw column {col!r} appears under two conditions"
                    )
                seen_raw.add(col)

    @property
    def conditions(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[str]]) -> "ConditionMapping":
        return cls(tuple((name, tuple(cols)) for name, cols in data.items()))

    @classmethod
    def from_json(cls, path: str | Path) -> "ConditionMapping":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigurationError("mapping file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, list[str]]:
        return {name: list(cols) for name, cols in self.entries}


@dataclass
class TransitionTable:
    """Row-wise consecutive-week pairs, the structure-learning substrate.

    Row i pairs ``x0[i]`` (the condition vector of some region at week w) with
    ``x1[i]`` (the same region at week w + 1). ``region_index`` / ``week1_index``
    locate each row in ``regions`` / ``weeks``; ``week1_index`` refers to the
    later week of the pair. Rows contain no missing values.
    """

    conditions: tuple[str, ...]
    x0: np.ndarray
    x1: np.ndarray
    region_index: np.ndarray
    week1_index: np.ndarray
    regions: tuple[RegionId, ...]
    weeks: tuple[date, ...]

    @property
    def n_rows(self) -> int:
        return self.x0.shape[0]

    @property
    def n_conditions(self) -> int:
        return len(self.conditions)

    def condition_index(self, condition: str) -> int:
        try:
            return self.conditions.index(condition)
        except ValueError:
            raise ValidationError(f"unknown condition {condition!r}") from None

    def take(self, indices: np.ndarray | Sequence[int]) -> "TransitionTable":
        """A new table from the given rows (repeats allowed, e.g. bootstrap)."""
        idx = np.asarray(indices, dtype=np.intp)
        return TransitionTable(
            conditions=self.conditions,
            x0=self.x0[idx],
            x1=self.x1[idx],
            region_index=self.region_index[idx],
            week1_index=self.week1_index[idx],
            regions=self.regions,
            weeks=self.weeks,
        )

    def permute_conditions(self, order: Sequence[int]) -> "TransitionTable":
        """A new table with condition columns reordered by index."""
        perm = np.asarray(order, dtype=np.intp)
        if sorted(perm.tolist()) != list(range(self.n_conditions)):
            raise ValidationError("order must be a permutation of condition indices")
        return TransitionTable(
            conditions=tuple(self.conditions[i] for i in perm),
            x0=self.x0[:, perm],
            x1=self.x1[:, perm],
            region_index=self.region_index,
            week1_index=self.week1_index,
            regions=self.regions,
            weeks=self.weeks,
        )


def _parse_float(text: str, line_no: int, column: str) -> float:
    text = text.strip()
    if text == "":
        return np.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {line_no}: cannot parse {text!r} in column {column!r}")
    return value


def load_panel(
    source: str | Path | IO[str],
    mapping: ConditionMapping | None = None,
    aggregate: str = "sum",
) -> PanelDataset:
    """Load a weekly panel CSV, aggregating raw columns into conditions.

    Parameters
    ----------
    source : path or text file object
        CSV with header ``date,state_code,county_code,<raw columns...>``.
    mapping : ConditionMapping, optional
        Aggregates raw columns into named conditions. When omitted, every raw
        column is its own condition. Within a condition, missing raw cells
        contribute zero unless all of them are missing, in which case the
        aggregate is missing.
    aggregate : {"sum", "mean"}
        How mapped columns combine ("mean" averages the observed cells).
    """
    if aggregate not in ("sum", "mean"):
        raise ConfigurationError(f"unknown aggregate {aggregate!r}")
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_panel(fh, mapping=mapping, aggregate=aggregate)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: empty input")
    header = [h.strip() for h in header]
    for key in KEY_COLUMNS:
        if key not in header:
            raise ParseError(f"line 1: missing required column {key!r}")
    key_pos = {key: header.index(key) for key in KEY_COLUMNS}
    raw_columns = [h for h in header if h not in KEY_COLUMNS]
    if len(set(raw_columns)) != len(raw_columns):
        raise ParseError("line 1: duplicate column names")
    raw_pos = [i for i, h in enumerate(header) if h not in KEY_COLUMNS]

    cells: dict[tuple[RegionId, date], np.ndarray] = {}
    line_no = 1
    for row in reader:
        line_no += 1
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"line {line_no}: expected {len(header)} fields, got {len(row)}"
            )
        try:
            week = date.fromisoformat(row[key_pos["date"]].strip())
        except ValueError:
            raise ParseError(f"line {line_no}: bad date {row[key_pos['date']]!r}")
        region = RegionId(
            state=row[key_pos["state_code"]].strip(),
            county=row[key_pos["county_code"]].strip(),
        )
        raw = np.array(
            [_parse_float(row[i], line_no, header[i]) for i in raw_pos], dtype=float
        )
        key = (region, week)
        if key in cells:
            raise ValidationError(
                f"line {line_no}: duplicate entry for region {region}, week {week}"
            )
        cells[key] = raw

    if not cells:
        raise ParseError("no data rows")

    regions = tuple(sorted({r for r, _ in cells}))
    weeks = tuple(sorted({w for _, w in cells}))
    region_idx = {r: i for i, r in enumerate(regions)}
    week_idx = {w: i for i, w in enumerate(weeks)}
    raw_values = np.full((len(regions), len(weeks), len(raw_columns)), np.nan)
    for (region, week), raw in cells.items():
        raw_values[region_idx[region], week_idx[week]] = raw

    if mapping is None:
        conditions = tuple(raw_columns)
        values = raw_values
    else:
        raw_index = {name: j for j, name in enumerate(raw_columns)}
        for condition, cols in mapping.entries:
            for col in cols:
                if col not in raw_index:
                    raise ConfigurationError(
                        f"mapping for {condition!r} references unknown column {col!r}"
                    )
        conditions = mapping.conditions
        values = np.empty((len(regions), len(weeks), len(conditions)))
        for j, (condition, cols) in enumerate(mapping.entries):
            block = raw_values[:, :, [raw_index[c] for c in cols]]
            observed = ~np.isnan(block)
            count = observed.sum(axis=2)
            total = np.nansum(block, axis=2)
            if aggregate == "mean":
                with np.errstate(invalid="ignore"):
                    total = total / count
            values[:, :, j] = np.where(count == 0, np.nan, total)

    # nonnegativity is a property of real search-frequency data; it is not
    # enforced here so that simulated (centered) panels round-trip through
    # the same files, but validate(require_nonnegative=True) can check it
    panel = PanelDataset(regions=regions, weeks=weeks, conditions=conditions, values=values)
    panel.validate()
    return panel


def save_panel(panel: PanelDataset, target: str | Path | IO[str]) -> None:
    """Write a panel as CSV; weeks a region does not cover are omitted."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as fh:
            save_panel(panel, fh)
            return
    writer = csv.writer(target)
    writer.writerow(list(KEY_COLUMNS) + list(panel.conditions))
    for i, region in enumerate(panel.regions):
        for t, week in enumerate(panel.weeks):
            row = panel.values[i, t]
            if np.isnan(row).all():
                continue
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow([week.isoformat(), region.state, region.county] + cells)


def drop_sparse_conditions(
    panel: PanelDataset, max_missing_fraction: float
) -> PanelDataset:
    """Remove every condition whose missing fraction exceeds the cutoff.

    The fraction counts all (region, week) cells, covered or not. Conditions
    exactly at the cutoff survive; order of survivors is preserved.
    """
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValidationError("max_missing_fraction must lie in [0, 1]")
    keep = [
        j
        for j, c in enumerate(panel.conditions)
        if panel.missing_fraction(c) <= max_missing_fraction
    ]
    if not keep:
        raise ValidationError(
            "all conditions exceed the missingness cutoff; nothing left to model"
        )
    return PanelDataset(
        regions=panel.regions,
        weeks=panel.weeks,
        conditions=tuple(panel.conditions[j] for j in keep),
        values=panel.values[:, :, keep].copy(),
    )


def make_transition_table(panel: PanelDataset) -> TransitionTable:
    """Pair each covered week with the next covered week of the same region.

    The panel must carry no partial weeks: a (region, week) is either fully
    observed or not covered at all (entirely missing, meaning the region has
    no data for that week). Imputation produces such panels.
    """
    panel.validate()
    missing = np.isnan(panel.values)
    covered = ~missing.all(axis=2)
    partial = covered & missing.any(axis=2)
    if partial.any():
        r, w = np.argwhere(partial)[0]
        c = int(np.flatnonzero(missing[r, w])[0])
        raise MissingDataError(
            f"missing value at region {panel.regions[r]}, week {panel.weeks[w]}, "
            f"condition {panel.conditions[c]}"
        )
    if panel.n_weeks >= 2:
        pair_ok = covered[:, :-1] & covered[:, 1:]
        r_idx, w_idx = np.nonzero(pair_ok)
    else:
        r_idx = w_idx = np.empty(0, dtype=np.intp)
    if r_idx.size == 0:
        raise InsufficientDataError("insufficient time points to form transitions")
    return TransitionTable(
        conditions=panel.conditions,
        x0=panel.values[r_idx, w_idx].copy(),
        x1=panel.values[r_idx, w_idx + 1].copy(),
        region_index=r_idx.astype(np.intp),
        week1_index=(w_idx + 1).astype(np.intp),
        regions=panel.regions,
        weeks=panel.weeks,
    )
