"""Treatment-effect estimators: the two-step CATE lasso and the baseline
meta-learners (T-learner with min-norm OLS or per-arm lasso, IPW-learner).

The two-step estimator first fits the control arm by minimum-norm least
squares (an interpolating fit when the dimension is at least the control-arm
size), then runs the lasso on the treated arm against the residualized
target. Only the difference vector is the estimand; the per-arm vectors
``beta0``/``beta1`` are exposed for diagnostics and are not individually
identified, so do not interpret them as arm-level models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import ArmSplit, CoefVector, ObservationSet
from .errors import (
    DimensionMismatchError,
    MissingTruthError,
    PropensityOutOfRangeError,
)
from .lasso import LassoProblem, LassoSolution, lambda_max, solve
from .linalg import min_norm_lsq

METHODS = ("cate_lasso", "t_ols", "t_lasso", "ipw_ols", "ipw_lasso")


@dataclass(frozen=True)
class FitOptions:
    """Controls for lasso-based fits.

    ``lam`` and ``delta`` parametrize the penalized objective
    ``delta * ||y1 - X1 (b + b0)||^2 / n + 2 lam ||b||_1``; rescaling both by
    the same factor leaves the fit unchanged, so ``delta`` is a numerical
    balance knob, not a tuning parameter. ``warm_start`` initializes
    penalized fits at the minimum-norm least-squares solution (useful in the
    near-unpenalized regime), except when ``lam`` already exceeds the
    problem's lambda_max, where the zero start is exact.
    """

    lam: float = 1.0
    delta: float = 0.5
    tol: float = 1e-8
    max_iter: int = 10_000
    warm_start: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")


@dataclass(frozen=True)
class CateModel:
    """A fitted estimator: the difference vector plus per-arm diagnostics."""

    beta_diff: CoefVector
    beta0: CoefVector
    beta1: CoefVector
    method: str
    lambda_used: float
    solver_trace: Optional[LassoSolution] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def p(self) -> int:
        return len(self.beta_diff)


def _solve_penalized(design, target, lam, weight, normalizer, tol, max_iter, warm_start):
    problem = LassoProblem(
        design=design, target=target, lam=lam, loss_weight=weight, normalizer=normalizer
    )
    init = None
    if warm_start and lam < lambda_max(problem):
        init = min_norm_lsq(design, target)
    return solve(problem, tol=tol, max_iter=max_iter, init=init)


def _merge_traces(a: LassoSolution, b: LassoSolution) -> LassoSolution:
    """Worst-case summary of two per-arm solves."""
    return LassoSolution(
        beta=a.beta,
        iterations=a.iterations + b.iterations,
        max_coord_change=max(a.max_coord_change, b.max_coord_change),
        kkt_violation=max(a.kkt_violation, b.kkt_violation),
        converged=a.converged and b.converged,
    )


def fit_cate_lasso(split: ArmSplit, opts: FitOptions) -> CateModel:
    """Two-step estimator of the effect-difference vector.

    Step one interpolates the control arm by minimum-norm least squares;
    step two runs the lasso on the treated arm against the residualized
    target, with both loss terms normalized by the full sample size. The
    returned ``beta1`` is reconstructed as ``beta_diff + beta0``.
    """
    beta0 = min_norm_lsq(split.x0, split.y0)
    target = split.y1 - split.x1 @ beta0
    sol = _solve_penalized(
        split.x1, target, opts.lam, opts.delta, split.n_total,
        opts.tol, opts.max_iter, opts.warm_start,
    )
    return CateModel(
        beta_diff=CoefVector(sol.beta, role="beta_diff"),
        beta0=CoefVector(beta0, role="arm0"),
        beta1=CoefVector(sol.beta + beta0, role="arm1"),
        method="cate_lasso",
        lambda_used=opts.lam,
        solver_trace=sol,
    )


def fit_t_learner(
    split: ArmSplit,
    regressor: str = "min_norm_ols",
    lam: Union[float, tuple[float, float]] = 0.0,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    warm_start: bool = False,
) -> CateModel:
    """Fit each arm separately and difference the fits.

    ``regressor`` is either ``min_norm_ols`` or ``lasso``; the lasso variant
    minimizes ``||y_d - X_d b||^2 / m_d + 2 lam ||b||_1`` per arm. ``lam``
    may be a scalar (shared by both arms) or a ``(treated, control)`` pair.
    """
    if regressor == "min_norm_ols":
        beta1 = min_norm_lsq(split.x1, split.y1)
        beta0 = min_norm_lsq(split.x0, split.y0)
        trace = None
        lam_used = 0.0
        method = "t_ols"
    elif regressor == "lasso":
        lam1, lam0 = lam if isinstance(lam, tuple) else (lam, lam)
        sol1 = _solve_penalized(split.x1, split.y1, lam1, 1.0, split.m1,
                                tol, max_iter, warm_start)
        sol0 = _solve_penalized(split.x0, split.y0, lam0, 1.0, split.m0,
                                tol, max_iter, warm_start)
        beta1, beta0 = sol1.beta, sol0.beta
        trace = _merge_traces(sol1, sol0)
        lam_used = max(lam1, lam0)
        method = "t_lasso"
    else:
        raise ValueError(f"unknown regressor {regressor!r}")
    return CateModel(
        beta_diff=CoefVector(beta1 - beta0, role="beta_diff"),
        beta0=CoefVector(beta0, role="arm0"),
        beta1=CoefVector(beta1, role="arm1"),
        method=method,
        lambda_used=lam_used,
        solver_trace=trace,
    )


def ipw_pseudo_outcomes(data: ObservationSet, propensity: np.ndarray) -> np.ndarray:
    """Inverse-propensity pseudo-outcomes ``1[D=1] Y/p - 1[D=0] Y/(1-p)``."""
    prop = np.asarray(propensity, dtype=np.float64).reshape(-1)
    if prop.shape != (data.n,):
        raise DimensionMismatchError("propensity vector must have length n")
    if not (np.all(prop > 0.0) and np.all(prop < 1.0)):
        raise PropensityOutOfRangeError("propensities must lie strictly in (0, 1)")
    treated = data.treatments == 1
    return np.where(treated, data.outcomes / prop, -data.outcomes / (1.0 - prop))


def fit_ipw_learner(
    data: ObservationSet,
    propensity: np.ndarray,
    regressor: str = "min_norm_ols",
    lam: float = 0.0,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    warm_start: bool = False,
) -> CateModel:
    """Regress inverse-propensity pseudo-outcomes on the covariates.

    Takes the true propensities (available in simulation); estimating them
    is out of scope. Only ``beta_diff`` is meaningful here; the per-arm
    slots hold zero vectors by convention.
    """
    pseudo = ipw_pseudo_outcomes(data, propensity)
    if regressor == "min_norm_ols":
        beta = min_norm_lsq(data.covariates, pseudo)
        trace = None
        lam_used = 0.0
        method = "ipw_ols"
    elif regressor == "lasso":
        sol = _solve_penalized(data.covariates, pseudo, lam, 1.0, data.n,
                               tol, max_iter, warm_start)
        beta = sol.beta
        trace = sol
        lam_used = lam
        method = "ipw_lasso"
    else:
        raise ValueError(f"unknown regressor {regressor!r}")
    zero = np.zeros(data.p)
    return CateModel(
        beta_diff=CoefVector(beta, role="beta_diff"),
        beta0=CoefVector(zero, role="arm0"),
        beta1=CoefVector(zero, role="arm1"),
        method=method,
        lambda_used=lam_used,
        solver_trace=trace,
    )


def predict_cate(model: CateModel, x: np.ndarray) -> float:
    """Point estimate of the treatment effect at covariate vector ``x``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.p:
        raise DimensionMismatchError(
            f"covariate vector has length {x.shape[0]}, model expects {model.p}"
        )
    return float(x @ model.beta_diff.values)


def rmse_against_cate(model: CateModel, covariates: np.ndarray,
                      true_beta_diff: np.ndarray) -> float:
    """Root mean squared error of predicted effects over the given rows."""
    covariates = np.asarray(covariates, dtype=np.float64)
    if covariates.shape[1] != model.p:
        raise DimensionMismatchError("covariate dimension does not match the model")
    err = covariates @ (model.beta_diff.values - np.asarray(true_beta_diff, dtype=np.float64))
    return float(np.sqrt(np.mean(err**2)))


def rmse_against_truth(model: CateModel, data: ObservationSet) -> float:
    """In-sample RMSE against the ground-truth effect surface."""
    if data.truth is None:
        raise MissingTruthError("dataset carries no ground truth")
    return rmse_against_cate(model, data.covariates, data.truth.beta_diff)
