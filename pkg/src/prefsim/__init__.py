"""Simulation and inference for jointly modeled marks and sampling locations.

The package simulates Matern Gaussian random fields on a regular grid,
draws uniform and preferential sampling designs with Gaussian marks, and
fits three latent-field models (geostatistical, preferential, mixed
indicator) by an inner-Newton/outer-Nelder-Mead Laplace scheme. A harness
sweeps the factorial study design and reports WAIC, out-of-sample RMSE,
and abundance-integration ratios.
"""

__version__ = "0.1.0"

from .fields import (
    FactorizationError,
    FieldRealization,
    GridSpec,
    MaternParams,
    build_cov_matrix,
    interpolate,
    matern_cov,
    sample_field,
)
from .harness import (
    ExperimentConfig,
    SummaryTable,
    aggregate,
    desk_profile,
    full_profile,
    read_results,
    run_experiment,
    scenario_grid,
)
from .inference import (
    FitResult,
    InferenceConfig,
    ModeResult,
    Predictive,
    find_mode,
    fit,
    laplace_log_evidence,
    posterior_functional_draws,
    predict,
)
from .metrics import ScenarioResult, WaicResult, abundance, mark_loglik_matrix, rmse, waic
from .models import (
    CellCounts,
    HyperParams,
    ModelKind,
    cell_counts,
    neg_log_posterior,
    nlp_grad_u,
    nlp_hess_u,
)
from .report import report
from .sampling import (
    Dataset,
    Observation,
    SimParams,
    generate_marks,
    make_dataset,
    preferential_points,
    uniform_points,
)
from .scenarios import ScenarioSpec, derive_seed

__all__ = [
    "__version__",
    "FactorizationError",
    "FieldRealization",
    "GridSpec",
    "MaternParams",
    "build_cov_matrix",
    "interpolate",
    "matern_cov",
    "sample_field",
    "ExperimentConfig",
    "SummaryTable",
    "aggregate",
    "desk_profile",
    "full_profile",
    "read_results",
    "run_experiment",
    "scenario_grid",
    "FitResult",
    "InferenceConfig",
    "ModeResult",
    "Predictive",
    "find_mode",
    "fit",
    "laplace_log_evidence",
    "posterior_functional_draws",
    "predict",
    "ScenarioResult",
    "WaicResult",
    "abundance",
    "mark_loglik_matrix",
    "rmse",
    "waic",
    "CellCounts",
    "HyperParams",
    "ModelKind",
    "cell_counts",
    "neg_log_posterior",
    "nlp_grad_u",
    "nlp_hess_u",
    "report",
    "Dataset",
    "Observation",
    "SimParams",
    "generate_marks",
    "make_dataset",
    "preferential_points",
    "uniform_points",
    "ScenarioSpec",
    "derive_seed",
]
