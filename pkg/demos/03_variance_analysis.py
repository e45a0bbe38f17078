#!/usr/bin/env python3
"""Variance analytics: spatio-temporal components and causal-effect shares.

First quantifies how much of each condition's variance the spatial grouping
and weekly autocorrelation explain, then fits the true network and splits
each node's explained variance among its parents, overall and within
quartile strata of a third condition.
"""

import numpy as np

from paneldbn import (
    GroundTruthSpec,
    StratumSpec,
    fit_parameters,
    make_transition_table,
    r_squared,
    random_dbn,
    sample_panel,
    stratified_share,
    variance_components,
    variance_decomposition,
)

SEED = 5


def main():
    truth = random_dbn(
        GroundTruthSpec(
            n_conditions=6,
            arcs_per_condition=2.0,
            coefficient_range=(0.3, 0.6),
            county_intercept_sd=0.6,
            seed=SEED,
        )
    )
    panel = sample_panel(truth, n_counties=120, n_weeks=90,
                         county_intercept_sd=0.6, seed=SEED, n_states=8)

    print("variance components (method of moments):")
    comps = variance_components(panel)
    print(f"{'condition':10s} {'state':>7s} {'county':>7s} {'county+AR':>10s}")
    for condition, c in comps.per_condition.items():
        print(f"{condition:10s} {c.state_share:7.2%} {c.county_share:7.2%} "
              f"{c.county_plus_ar_share:10.2%}")
    avg = comps.averages()
    print(f"{'average':10s} {avg.state_share:7.2%} {avg.county_share:7.2%} "
          f"{avg.county_plus_ar_share:10.2%}")

    table = make_transition_table(panel)
    dbn = fit_parameters(truth.graph, table)
    r2 = {c: r_squared(dbn, table, c) for c in panel.conditions}
    print(f"\nper-condition R^2 given the previous week "
          f"(average {np.mean(list(r2.values())):.2f}):")
    print("  " + ", ".join(f"{c} {v:.2f}" for c, v in r2.items()))

    target = max(
        (c for c in panel.conditions if len(truth.graph.parents_of(c)) > 1),
        key=lambda c: len(truth.graph.parents_of(c)),
    )
    decomp = variance_decomposition(dbn, table, target)
    print(f"\nexplained-variance split for {target} "
          f"(self excluded from normalization):")
    for e in decomp.entries:
        norm = "self" if e.parent == target else f"{e.normalized_share:7.2%}"
        print(f"  {e.parent:8s} raw {e.raw_share:7.2%}  normalized {norm}")

    driver = next(p for p in truth.graph.parents_of(target) if p != target)
    stratifier = next(
        c for c in panel.conditions if c not in (target, driver)
    )
    shares = stratified_share(
        dbn, table, target=target, driver=driver, stratum=StratumSpec(stratifier)
    )
    print(f"\nshare of {target} explained by {driver}, stratified by "
          f"{stratifier} quartiles:")
    print(f"  low {shares.low:.2%}  average {shares.average:.2%}  "
          f"high {shares.high:.2%}  (unstratified {shares.unstratified:.2%})")


if __name__ == "__main__":
    main()
