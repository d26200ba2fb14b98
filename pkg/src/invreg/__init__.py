"""Inverse Regression Library - indirect estimators of multivariate regression coefficients.

Module structure:
- errors: Exception hierarchy (argument errors are ValueErrors, numerical ones LinAlgErrors)
- config: Solver settings, .env overrides, key=value experiment files
- matlin: Dense SPD linear algebra and the forward-from-inverse assembly
- simgen: Simulation designs, ground truth and seeded data generation
- sparse_est: Lasso, graphical lasso, ridge precision and least-squares baselines
- rrr: Closed-form reduced-rank regression
- tuning: Fold plans and cross-validation of every tuning parameter
- indirect: Estimator registry and the per-dataset IndirectFitter
- bench: Monte-Carlo runner, holdout study, decay diagnostic, report output
- tables: Published simulation tables and their configurations
- cli: The ``invreg`` command
"""

# Errors
from invreg.errors import (
    BadGamma,
    BadK,
    BadRho,
    EstimatorUndefined,
    InvregError,
    MissingOracle,
    NoConvergence,
    NonSymmetric,
    NotPositiveDefinite,
    ParseError,
    RankTooLarge,
    ShapeMismatch,
    Singular,
    SingularInput,
    TooFewRows,
)

# Configuration
from invreg.config import Settings, get_settings, load_config_file, parse_grid

# Linear algebra
from invreg.matlin import (
    JointCovariance,
    assemble_forward,
    cholesky,
    norms,
    numerical_rank,
    partitioned_precision,
    pseudo_inverse,
    spd_inverse,
    spd_sqrt,
    sym_eigen,
)

# Simulation
from invreg.simgen import (
    Ar1Spec,
    Dataset,
    JointGroundTruth,
    ReducedRankForwardModelSpec,
    ReducedRankInverseModelSpec,
    SparseInverseModelSpec,
    ar1,
    center,
    generate,
    sample_mvn,
)

# Plug-in estimators
from invreg.sparse_est import (
    LassoProblem,
    PrecisionProblem,
    eta_lasso,
    glasso,
    lasso_column,
    lasso_forward,
    ols,
    ridge_ls,
    ridge_precision,
)

# Reduced rank
from invreg.rrr import RrrFit, rrr_fit, rrr_forward, rrr_inverse

# Tuning
from invreg.tuning import (
    FoldPlan,
    Grid,
    Selection,
    cv_lasso_lambda,
    cv_rank,
    cv_validation_likelihood,
    make_folds,
)

# Indirect estimators
from invreg.indirect import (
    ESTIMATOR_NAMES,
    BetaEstimate,
    EstimatorSpec,
    IndirectFitter,
    InversePlugins,
    assemble_beta,
    fit,
    predict,
    rank_of,
)

# Experiments
from invreg.bench import (
    Cell,
    ExperimentConfig,
    ExperimentReport,
    decay_diagnostic,
    load_dataset_csv,
    model_error,
    prediction_error,
    run_holdout_study,
    run_simulation,
    write_report,
)
from invreg.tables import compare_with_published, published_cells, table_config

__all__ = [
    # Errors
    "InvregError",
    "NotPositiveDefinite",
    "NonSymmetric",
    "Singular",
    "SingularInput",
    "NoConvergence",
    "EstimatorUndefined",
    "BadRho",
    "BadGamma",
    "BadK",
    "RankTooLarge",
    "MissingOracle",
    "ShapeMismatch",
    "ParseError",
    "TooFewRows",
    # Configuration
    "Settings",
    "get_settings",
    "load_config_file",
    "parse_grid",
    # Linear algebra
    "JointCovariance",
    "assemble_forward",
    "cholesky",
    "norms",
    "numerical_rank",
    "partitioned_precision",
    "pseudo_inverse",
    "spd_inverse",
    "spd_sqrt",
    "sym_eigen",
    # Simulation
    "Ar1Spec",
    "Dataset",
    "JointGroundTruth",
    "SparseInverseModelSpec",
    "ReducedRankInverseModelSpec",
    "ReducedRankForwardModelSpec",
    "ar1",
    "center",
    "generate",
    "sample_mvn",
    # Plug-in estimators
    "LassoProblem",
    "PrecisionProblem",
    "eta_lasso",
    "glasso",
    "lasso_column",
    "lasso_forward",
    "ols",
    "ridge_ls",
    "ridge_precision",
    # Reduced rank
    "RrrFit",
    "rrr_fit",
    "rrr_forward",
    "rrr_inverse",
    # Tuning
    "FoldPlan",
    "Grid",
    "Selection",
    "cv_lasso_lambda",
    "cv_rank",
    "cv_validation_likelihood",
    "make_folds",
    # Indirect estimators
    "ESTIMATOR_NAMES",
    "BetaEstimate",
    "EstimatorSpec",
    "IndirectFitter",
    "InversePlugins",
    "assemble_beta",
    "fit",
    "predict",
    "rank_of",
    # Experiments
    "Cell",
    "ExperimentConfig",
    "ExperimentReport",
    "decay_diagnostic",
    "load_dataset_csv",
    "model_error",
    "prediction_error",
    "run_holdout_study",
    "run_simulation",
    "write_report",
    "compare_with_published",
    "published_cells",
    "table_config",
]
