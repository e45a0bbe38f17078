from datetime import date, timedelta

import numpy as np
import pytest

from paneldbn import PanelDataset, RegionId

START = date(2020, 3, 2)


def weeks_from(n, start=START):
    return tuple(start + timedelta(days=7 * t) for t in range(n))


def make_panel(values, conditions=None, regions=None, states=None):
    """Panel from a (regions, weeks, conditions) array; NaN marks missing."""
    values = np.asarray(values, dtype=float)
    n_regions, n_weeks, n_conditions = values.shape
    if conditions is None:
        conditions = tuple(f"C{j:02d}" for j in range(n_conditions))
    if regions is None:
        if states is None:
            states = ["S0"] * n_regions
        regions = tuple(
            RegionId(state=states[i], county=f"R{i:03d}") for i in range(n_regions)
        )
    return PanelDataset(
        regions=tuple(regions),
        weeks=weeks_from(n_weeks),
        conditions=tuple(conditions),
        values=values.copy(),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
