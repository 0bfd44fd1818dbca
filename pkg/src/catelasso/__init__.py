"""Two-step lasso estimation of conditional average treatment effects.

The estimator fits the control arm by minimum-norm least squares, then runs
an l1-penalized fit of the treated arm against the residualized target, so
only the difference between the two arms' coefficient vectors is penalized.
Baselines (T-learner, IPW-learner), finite-sample theory diagnostics, data
generators, and a config-driven benchmark runner round out the package.
"""

__version__ = "0.1.0"

from .data import (
    ArmSplit,
    CoefVector,
    GroundTruth,
    ObservationSet,
    check_overlap,
    load_csv,
    load_truth_json,
    save_csv,
    save_truth_json,
    split_by_arm,
)
from .errors import (
    CateLassoError,
    ConfigError,
    CsvParseError,
    DimensionMismatchError,
    EmptyArmError,
    MissingPropensityError,
    MissingTreatmentColumnError,
    MissingTruthError,
    NegativeDiagonalError,
    NonFiniteProductError,
    PropensityOutOfRangeError,
)
from .estimators import (
    CateModel,
    FitOptions,
    fit_cate_lasso,
    fit_ipw_learner,
    fit_t_learner,
    predict_cate,
    rmse_against_cate,
    rmse_against_truth,
)
from .lasso import LassoProblem, LassoSolution, kkt_check, lambda_max, soft_threshold, solve
from .linalg import gram, min_norm_lsq, pseudoinverse, svd_factors, trace_pseudo_product
from .simulate import IhdpConfig, SimConfig, gen_ihdp_surface_a, gen_synthetic, rng_stream
from .theory import (
    TheoryReport,
    build_theory_report,
    compatibility_constant,
    composite_noise_scale,
    composite_noise_vector,
    concentration_event_frequency,
    max_column_scale,
    oracle_error_bounds,
    oracle_inequality_frequency,
    theoretical_penalty,
)

__all__ = [name for name in dir() if not name.startswith("_")]
