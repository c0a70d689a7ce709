"""Optimistic Gaussian likelihoods over divergence balls.

Computes the largest Gaussian log-likelihood attainable when the
covariance (or mean) is allowed to move within a Fisher-Rao or
Kullback-Leibler ball around a nominal estimate, and applies it to
flexible quadratic discriminant classification with a reproducible
benchmark harness.
"""

__version__ = "0.1.0"

from .spd_core import (
    DefinitenessError,
    SpdMatrix,
    SpectralError,
    SymMatrix,
    log_det,
    spectral_fn,
    sym_eig,
    trace_inner,
)
from .fr_geometry import (
    FrBall,
    exp_map,
    fr_distance,
    geodesic,
    log_map,
    metric_inner,
    project_fr_ball,
)
from .fr_solver import (
    FrProblem,
    FrSolverOptions,
    SolveReport,
    SolverBreakdownError,
    objective,
    optimistic_loglik_fr,
    riemannian_gradient,
    smoothness_constants,
    solve,
    theorem2_constants,
)
from .kl_solver import (
    KlProblem,
    KlSolution,
    dual_derivatives_full,
    dual_derivatives_lowrank,
    kl_divergence,
    optimistic_loglik_kl,
    solve_kl,
)
from .mean_solver import (
    MeanProblem,
    fr_mean_distance,
    kl_mean_divergence,
    solve_mean,
)
from .classify import (
    FlexRuleConfig,
    GaussianClassModel,
    ccr,
    cross_validate,
    fit,
    gaussian_loglik,
    ledoit_wolf,
    predict_flex,
    predict_qda,
)
from .bench_cli import (
    Dataset,
    ExperimentConfig,
    bundled_dataset,
    cli_entry,
    load_csv,
    run_classification_benchmark,
    run_convergence_study,
    run_estimation_error_study,
    seeded_stream,
)

__all__ = [
    "__version__",
    "DefinitenessError",
    "SpdMatrix",
    "SpectralError",
    "SymMatrix",
    "log_det",
    "spectral_fn",
    "sym_eig",
    "trace_inner",
    "FrBall",
    "exp_map",
    "fr_distance",
    "geodesic",
    "log_map",
    "metric_inner",
    "project_fr_ball",
    "FrProblem",
    "FrSolverOptions",
    "SolveReport",
    "SolverBreakdownError",
    "objective",
    "optimistic_loglik_fr",
    "riemannian_gradient",
    "smoothness_constants",
    "solve",
    "theorem2_constants",
    "KlProblem",
    "KlSolution",
    "dual_derivatives_full",
    "dual_derivatives_lowrank",
    "kl_divergence",
    "optimistic_loglik_kl",
    "solve_kl",
    "MeanProblem",
    "fr_mean_distance",
    "kl_mean_divergence",
    "solve_mean",
    "FlexRuleConfig",
    "GaussianClassModel",
    "ccr",
    "cross_validate",
    "fit",
    "gaussian_loglik",
    "ledoit_wolf",
    "predict_flex",
    "predict_qda",
    "Dataset",
    "ExperimentConfig",
    "bundled_dataset",
    "cli_entry",
    "load_csv",
    "run_classification_benchmark",
    "run_convergence_study",
    "run_estimation_error_study",
    "seeded_stream",
]
