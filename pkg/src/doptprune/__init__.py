"""D-optimal design construction and certified candidate-set pruning.

The package computes optimal approximate designs with an equivalence-based
certificate, builds exact (size-n) designs by rounding, exchanges or
exhaustive enumeration, and, at its core, removes candidate points that
provably cannot support any D-optimal exact design, without loss of
optimality.
"""

from . import errors
from .approx import ApproxSolution, max_variance_set, solution_from_design, solve_approx
from .designs import (
    CandidateSet,
    Design,
    ModelSummary,
    d_criterion,
    efficiency,
    info_matrix,
    standardize,
    summarize,
    variance_function,
)
from .exact import (
    ExactSearchResult,
    brute_force_exact,
    compute_w_plus,
    efficient_rounding,
    exact_search,
    kl_exchange,
)
from .generators import InstanceSpec, fig1_disk, gaussian_instance, mixture_grid
from .linalg import SpdMatrix, inv_sqrt_spd, spd_factorize, spd_inverse, sym_eigen
from .pipeline import PipelineConfig, PipelineReport, run_pipeline, sweep, verify_safety
from .pruning import (
    DualCertificate,
    PruneReport,
    PruneThresholds,
    augmentation_keep,
    augmentation_threshold,
    discrepancy,
    dual_certificate,
    eigen_bound_roots,
    exchange_constants,
    exchange_keep,
    prune,
    prune_thresholds,
)

__version__ = "0.1.0"

__all__ = [
    "ApproxSolution",
    "CandidateSet",
    "Design",
    "DualCertificate",
    "ExactSearchResult",
    "InstanceSpec",
    "ModelSummary",
    "PipelineConfig",
    "PipelineReport",
    "PruneReport",
    "PruneThresholds",
    "SpdMatrix",
    "augmentation_keep",
    "augmentation_threshold",
    "brute_force_exact",
    "compute_w_plus",
    "d_criterion",
    "discrepancy",
    "dual_certificate",
    "efficiency",
    "efficient_rounding",
    "eigen_bound_roots",
    "errors",
    "exact_search",
    "exchange_constants",
    "exchange_keep",
    "fig1_disk",
    "gaussian_instance",
    "info_matrix",
    "inv_sqrt_spd",
    "kl_exchange",
    "max_variance_set",
    "mixture_grid",
    "prune",
    "prune_thresholds",
    "run_pipeline",
    "solution_from_design",
    "solve_approx",
    "spd_factorize",
    "spd_inverse",
    "standardize",
    "summarize",
    "sweep",
    "sym_eigen",
    "variance_function",
    "verify_safety",
]
