"""burstlab: joint fitting of grids of self-exciting event sequences.

Many partially observed univariate Hawkes processes, one per
(assignment, student) pair, are fit jointly under a relaxed clustering
penalty on the excitement columns, a mixture-Gamma prior on observed
excitements, and a nuclear-norm penalty that transfers structure onto
pairs with no observations. Ships with a thinning simulator and an
evaluation harness for the synthetic protocol.
"""

__version__ = "0.1.0"

from .data import (
    EventDataset,
    EventSequence,
    HawkesParams,
    load_events_csv,
    write_events_csv,
)
from .evaluate import (
    EvaluationReport,
    InterarrivalStats,
    adjusted_rand_index,
    count_mae,
    expected_count,
    extract_clusters,
    interarrival_stats,
    param_recovery_error,
)
from .likelihood import (
    LikelihoodCache,
    build_cache,
    compute_compensator_weights,
    compute_recursion,
    intensity,
    smooth_nll,
    smooth_nll_grad,
)
from .linops import (
    SpectralDecomposition,
    capped_simplex_project,
    nonneg_project,
    project_similarity,
    spectral_decomposition,
    svt,
)
from .optimizer import (
    FitConfig,
    FitResult,
    OptimizerError,
    alpha_update,
    fit,
    objective,
)
from .regularizers import (
    ClusterPenaltyConfig,
    ClusterState,
    GammaMixtureSpec,
    cluster_loss,
    cluster_loss_grad_excitement,
    cluster_loss_grad_similarity,
    gamma_log_prior,
    gamma_log_prior_grad,
    responsibilities,
)
from .simulate import (
    GroundTruth,
    SplitResult,
    SyntheticSpec,
    generate_dataset,
    seeded_stream,
    split_dataset,
    thinning_sample,
)

__all__ = [
    "__version__",
    "EventDataset",
    "EventSequence",
    "HawkesParams",
    "load_events_csv",
    "write_events_csv",
    "LikelihoodCache",
    "build_cache",
    "compute_compensator_weights",
    "compute_recursion",
    "intensity",
    "smooth_nll",
    "smooth_nll_grad",
    "SpectralDecomposition",
    "capped_simplex_project",
    "nonneg_project",
    "project_similarity",
    "spectral_decomposition",
    "svt",
    "ClusterPenaltyConfig",
    "ClusterState",
    "GammaMixtureSpec",
    "cluster_loss",
    "cluster_loss_grad_excitement",
    "cluster_loss_grad_similarity",
    "gamma_log_prior",
    "gamma_log_prior_grad",
    "responsibilities",
    "FitConfig",
    "FitResult",
    "OptimizerError",
    "alpha_update",
    "fit",
    "objective",
    "GroundTruth",
    "SplitResult",
    "SyntheticSpec",
    "generate_dataset",
    "seeded_stream",
    "split_dataset",
    "thinning_sample",
    "EvaluationReport",
    "InterarrivalStats",
    "adjusted_rand_index",
    "count_mae",
    "expected_count",
    "extract_clusters",
    "interarrival_stats",
    "param_recovery_error",
]
