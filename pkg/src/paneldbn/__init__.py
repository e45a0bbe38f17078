"""Dynamic Bayesian networks over panel time series.

Workflow: load or simulate a weekly region x condition panel, impute gaps,
build the consecutive-week transition table, learn an averaged two-slice
network with penalized hill climbing over bootstrap resamples, fold it into
a cyclic graph, and quantify effects through explained-variance shares.
"""

from .analysis import (
    ComponentShares,
    DynamicBN,
    StaticComparison,
    StratifiedShares,
    StratumSpec,
    TuneResult,
    VarianceComponents,
    VarianceDecomposition,
    VarianceEntry,
    compare_static,
    detrend,
    fit_parameters,
    learn_consensus,
    r_squared,
    stratified_share,
    tune_penalty,
    variance_components,
    variance_decomposition,
)
from .averaging import (
    ArcStrengthTable,
    BootstrapSpec,
    bootstrap_strengths,
    consensus,
    estimate_threshold,
)
from .errors import (
    AggregateError,
    ConfigurationError,
    DegenerateModelError,
    InstabilityError,
    InsufficientDataError,
    MissingDataError,
    PanelDbnError,
    ParseError,
    PlacementError,
    SingularDesignError,
    ValidationError,
)
from .gaussian import (
    GaussianNodeModel,
    LocalScorer,
    PenaltyConfig,
    SuffStats,
    fit_node,
    node_loglik,
    score_node,
)
from .graphs import (
    FoldedEdge,
    FoldedGraph,
    NodeRef,
    StaticDag,
    TwoSliceGraph,
    fold,
    folded_to_dot,
    unfold,
)
from .impute import (
    ImputationReport,
    ImputationSummary,
    MissingnessSpec,
    evaluate_imputation,
    impute_ewma,
    impute_panel,
    inject_missing,
)
from .panel import (
    ConditionMapping,
    PanelDataset,
    RegionId,
    TransitionTable,
    drop_sparse_conditions,
    load_panel,
    make_transition_table,
    save_panel,
)
from .search import SearchOptions, hill_climb, network_score
from .simulate import (
    GroundTruthSpec,
    RecoveryReport,
    random_dbn,
    sample_panel,
    score_recovery,
)

__version__ = "0.1.0"
