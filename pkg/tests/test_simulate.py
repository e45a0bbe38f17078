import numpy as np
import pytest

from paneldbn import (
    GaussianNodeModel,
    GroundTruthSpec,
    InstabilityError,
    NodeRef,
    TwoSliceGraph,
    ValidationError,
    make_transition_table,
    random_dbn,
    sample_panel,
    score_recovery,
    variance_components,
)
from paneldbn.analysis import DynamicBN


def test_single_condition_graph_is_exactly_the_self_loop():
    dbn = random_dbn(GroundTruthSpec(n_conditions=1, arcs_per_condition=0.0, seed=1))
    assert dbn.graph.arcs == frozenset({("C00", "C00")})


def test_cross_arc_density_targets_expectation():
    counts = []
    for seed in range(20):
        spec = GroundTruthSpec(n_conditions=12, arcs_per_condition=3.0, seed=seed)
        counts.append(len(random_dbn(spec).graph.cross_arcs()))
    assert abs(np.mean(counts) - 36.0) <= 6.0


def test_random_dbn_deterministic():
    spec = GroundTruthSpec(n_conditions=6, arcs_per_condition=2.0, seed=77)
    a = random_dbn(spec)
    b = random_dbn(spec)
    assert a.graph == b.graph
    for c in a.conditions:
        assert np.array_equal(
            a.node_models[c].coefficients, b.node_models[c].coefficients
        )


def test_random_dbn_spectral_radius_bounded():
    for seed in range(10):
        spec = GroundTruthSpec(
            n_conditions=8, arcs_per_condition=5.0, coefficient_range=(0.5, 0.9), seed=seed
        )
        a, _, _ = random_dbn(spec).coefficient_matrix()
        assert np.max(np.abs(np.linalg.eigvals(a))) <= 0.95 + 1e-9


def test_infeasible_density_rejected():
    with pytest.raises(ValidationError):
        GroundTruthSpec(n_conditions=3, arcs_per_condition=5.0)


def _ar1_dbn(rho=0.8, sigma=1.0, mu=0.0):
    graph = TwoSliceGraph(conditions=("X",), arcs=frozenset({("X", "X")}))
    model = GaussianNodeModel(
        target=NodeRef("X", 1),
        parents=(NodeRef("X", 0),),
        intercept=mu,
        coefficients=np.array([rho]),
        residual_variance=sigma**2,
    )
    return DynamicBN(graph=graph, node_models={"X": model}, conditions=("X",))


def test_sample_panel_ar1_autocorrelation():
    panel = sample_panel(
        _ar1_dbn(rho=0.8), n_counties=1, n_weeks=10000, county_intercept_sd=0.0, seed=3
    )
    x = panel.values[0, :, 0]
    lag1 = np.corrcoef(x[1:], x[:-1])[0, 1]
    assert lag1 == pytest.approx(0.8, abs=0.02)


def test_sample_panel_degenerate_dynamics_stay_at_baseline():
    dbn = _ar1_dbn(rho=0.0, sigma=1e-6, mu=5.0)
    panel = sample_panel(dbn, n_counties=4, n_weeks=20, county_intercept_sd=2.0, seed=9)
    for r in range(4):
        series = panel.values[r, :, 0]
        assert series.std() < 1e-4
        # constant at intercept + county offset
        assert abs(series.mean() - 5.0) < 8.0


def test_sample_panel_offsets_shift_stationary_mean():
    dbn = _ar1_dbn(rho=0.6, sigma=0.05, mu=2.0)
    panel = sample_panel(dbn, n_counties=200, n_weeks=50, county_intercept_sd=1.0, seed=5)
    county_means = panel.values[:, :, 0].mean(axis=1)
    # stationary mean is mu/(1-rho) = 5 plus the county offset ~ N(0, 1)
    assert county_means.mean() == pytest.approx(5.0, abs=0.25)
    assert county_means.std() == pytest.approx(1.0, abs=0.25)


def test_sample_panel_deterministic_and_complete():
    spec = GroundTruthSpec(n_conditions=4, arcs_per_condition=1.0, seed=11)
    dbn = random_dbn(spec)
    p1 = sample_panel(dbn, n_counties=8, n_weeks=30, county_intercept_sd=0.3, seed=2, n_states=3)
    p2 = sample_panel(dbn, n_counties=8, n_weeks=30, county_intercept_sd=0.3, seed=2, n_states=3)
    assert np.array_equal(p1.values, p2.values)
    p1.validate()
    assert p1.is_complete()
    assert len(p1.states()) == 3
    make_transition_table(p1)  # weeks uniformly spaced and fully observed


def test_sample_panel_running_variance_stabilizes():
    spec = GroundTruthSpec(n_conditions=6, arcs_per_condition=2.0, seed=13)
    dbn = random_dbn(spec)
    panel = sample_panel(dbn, n_counties=50, n_weeks=200, county_intercept_sd=0.1, seed=13)
    x = panel.values
    first = x[:, 100:150, :].std(axis=(0, 1))
    second = x[:, 150:, :].std(axis=(0, 1))
    assert np.all(second < 2.0 * first + 0.5)


def test_sample_panel_instability_detected():
    graph = TwoSliceGraph(conditions=("X",), arcs=frozenset({("X", "X")}))
    model = GaussianNodeModel(
        target=NodeRef("X", 1),
        parents=(NodeRef("X", 0),),
        intercept=1.0,
        coefficients=np.array([1.8]),
        residual_variance=1.0,
    )
    bad = DynamicBN(graph=graph, node_models={"X": model}, conditions=("X",))
    with pytest.raises(InstabilityError):
        sample_panel(bad, n_counties=1, n_weeks=500, county_intercept_sd=0.0, seed=1)


def test_large_county_offsets_dominate_variance_components():
    dbn = _ar1_dbn(rho=0.3, sigma=0.2)
    panel = sample_panel(
        dbn, n_counties=60, n_weeks=60, county_intercept_sd=3.0, seed=21, n_states=4
    )
    comp = variance_components(panel).per_condition["X"]
    assert comp.county_share > 0.8


def g(conds, *arcs):
    return TwoSliceGraph(conditions=conds, arcs=frozenset(arcs))


def test_score_recovery_identity():
    truth = g(("A", "B"), ("A", "B"), ("A", "A"))
    report = score_recovery(truth, truth)
    assert report.arc_precision == 1.0
    assert report.arc_recall == 1.0
    assert report.feedback_recall == 1.0
    assert report.structural_hamming_distance == 0


def test_score_recovery_empty_learned():
    truth = g(("A", "B", "C"), ("A", "B"), ("B", "C"), ("A", "A"))
    report = score_recovery(truth, g(("A", "B", "C")))
    assert report.arc_recall == 0.0
    assert report.structural_hamming_distance == 3


def test_score_recovery_half_feedback():
    truth = g(("A", "B"), ("A", "B"), ("B", "A"))
    learned = g(("A", "B"), ("A", "B"))
    report = score_recovery(truth, learned)
    assert report.feedback_recall == 0.0
    assert report.arc_recall == 0.5
    assert report.arc_precision == 1.0


def test_score_recovery_condition_mismatch():
    with pytest.raises(ValidationError):
        score_recovery(g(("A",)), g(("B",)))
