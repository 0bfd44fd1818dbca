"""Finite-sample theory quantities and their Monte Carlo checks: the
composite noise scale, the theory-prescribed penalty, the compatibility
constant of the treated-arm Gram matrix, the concentration event for the
correlation of composite noise with the treated design, and the resulting
error bounds.

The compatibility constant is estimated, not certified: the cone program is
nonconvex, so the estimator samples the cone and refines the best candidates
by projected gradient. The returned value is the ratio at the best feasible
point found, hence an upper bound on the true constant that tightens with
the sampling budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import ObservationSet, split_by_arm
from .errors import NegativeDiagonalError
from .estimators import FitOptions, fit_cate_lasso
from .linalg import gram, pseudoinverse, trace_pseudo_product
from .simulate import SimConfig, gen_synthetic, rng_stream

MAX_COMPAT_DIM = 64


def composite_noise_scale(x0, x1, sigma1: float, sigma0: float) -> float:
    """Noise scale of the residualized treated-arm problem.

    Equals ``sqrt(sigma1^2 + sigma0^2 * tr((x0'x0)^+ x1'x1))``: control-arm
    noise leaks into the treated-arm target through the step-one fit, scaled
    by the cross-design trace.
    """
    if sigma1 < 0.0 or sigma0 < 0.0:
        raise ValueError("noise standard deviations must be >= 0")
    trace = trace_pseudo_product(x0, x1).trace if sigma0 > 0.0 else 0.0
    return math.sqrt(sigma1**2 + sigma0**2 * trace)


def max_column_scale(gram1: np.ndarray) -> float:
    """Square root of the largest Gram diagonal (the column-scale bound)."""
    gram1 = np.asarray(gram1, dtype=np.float64)
    if gram1.ndim != 2 or gram1.shape[0] != gram1.shape[1]:
        raise ValueError("expected a square Gram matrix")
    diag = np.diag(gram1)
    if np.any(diag < -1e-12):
        raise NegativeDiagonalError(f"Gram diagonal has negative entry {diag.min()}")
    return float(np.sqrt(max(float(diag.max()), 0.0)))


def theoretical_penalty(column_scale: float, noise_scale: float,
                        t: float, n: int, p: int) -> float:
    """Penalty level prescribed by the oracle-inequality analysis:
    ``3 * M * sigma * sqrt(2 (t^2 + log p) / n)``."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    return 3.0 * column_scale * noise_scale * math.sqrt(2.0 * (t * t + math.log(p)) / n)


def concentration_level(column_scale: float, noise_scale: float,
                        t: float, n: int, p: int) -> float:
    """Threshold for the design-noise correlation event:
    ``2 * M * sigma * sqrt((t^2 + 2 log p) / n)``."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    return 2.0 * column_scale * noise_scale * math.sqrt((t * t + 2.0 * math.log(p)) / n)


def oracle_error_bounds(lam: float, s0: int, phi0_sq: float) -> tuple[float, float]:
    """High-probability error bounds at penalty ``lam``: the l1 bound
    ``4 lam s0 / phi0^2`` and the in-sample prediction bound
    ``4 lam^2 s0 / phi0^2``."""
    if phi0_sq <= 0.0:
        raise ValueError("phi0_sq must be > 0")
    return 4.0 * lam * s0 / phi0_sq, 4.0 * lam * lam * s0 / phi0_sq


def composite_noise_vector(x0, x1, eps1, eps0) -> np.ndarray:
    """Realized treated-arm noise after the step-one fit:
    ``eps1 - x1 (x0'x0)^+ x0' eps0``."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    eps1 = np.asarray(eps1, dtype=np.float64).reshape(-1)
    eps0 = np.asarray(eps0, dtype=np.float64).reshape(-1)
    return eps1 - x1 @ (pseudoinverse(x0.T @ x0) @ (x0.T @ eps0))


# ---------------------------------------------------------------------------
# Compatibility constant
# ---------------------------------------------------------------------------

def _project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius."""
    if radius <= 0.0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, a.size + 1)
    rho = idx[u > css / idx][-1]
    theta = css[rho - 1] / rho
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _cone_ratio(sigma, support_mask, s0, beta):
    d = np.abs(beta[support_mask]).sum()
    if d <= 0.0:
        return np.inf
    return s0 * float(beta @ (sigma @ beta)) / (d * d)


def _refine_candidate(sigma, support_mask, s0, beta, iters=200):
    """Projected-gradient descent on the cone ratio from one start point."""
    beta = beta.copy()
    best = _cone_ratio(sigma, support_mask, s0, beta)
    step = 0.1
    for _ in range(iters):
        d1 = np.abs(beta[support_mask]).sum()
        quad = float(beta @ (sigma @ beta))
        grad = 2.0 * (sigma @ beta) * (d1 * d1)
        sign_s = np.zeros_like(beta)
        sign_s[support_mask] = np.sign(beta[support_mask])
        grad -= quad * 2.0 * d1 * sign_s
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        cand = beta - step * grad / gnorm
        ds = np.abs(cand[support_mask]).sum()
        if ds <= 0.0:
            step *= 0.5
            continue
        # restore cone feasibility, then rescale so the support l1 norm is 1
        tail = ~support_mask
        cand[tail] = _project_l1_ball(cand[tail], 3.0 * ds)
        cand /= ds
        value = _cone_ratio(sigma, support_mask, s0, cand)
        if value < best:
            beta, best = cand, value
            step *= 1.2
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return beta, best


def compatibility_constant(gram1: np.ndarray, support, budget: int = 10_000,
                           seed: int = 0) -> float:
    """Estimate the compatibility constant of ``gram1`` on ``support``.

    Minimizes ``s0 * b' G b / ||b_S||_1^2`` over the cone
    ``||b_Sc||_1 <= 3 ||b_S||_1`` by random cone sampling (``budget`` draws)
    followed by local refinement of the best candidates. The result is the
    value at the best feasible point found, an upper bound on the true
    minimum that tightens as the budget grows.
    """
    sigma = np.asarray(gram1, dtype=np.float64)
    p = sigma.shape[0]
    if p > MAX_COMPAT_DIM:
        raise ValueError(f"cone search supports p <= {MAX_COMPAT_DIM}, got {p}")
    support = np.asarray(sorted(set(int(j) for j in support)), dtype=np.int64)
    if support.size == 0:
        raise ValueError("support must be nonempty")
    if support.min() < 0 or support.max() >= p:
        raise ValueError("support indices out of range")
    s0 = int(support.size)
    mask = np.zeros(p, dtype=bool)
    mask[support] = True
    rng = rng_stream(seed, "compatibility-search")

    best_values = []
    candidates = []
    tail_size = p - s0
    for k in range(max(int(budget), 1)):
        beta = np.zeros(p)
        mags = rng.dirichlet(np.ones(s0)) if s0 > 1 else np.array([1.0])
        beta[mask] = mags * rng.choice((-1.0, 1.0), size=s0)
        if tail_size and k % 2 == 0:
            share = 3.0 * rng.uniform()
            tail_mags = rng.dirichlet(np.ones(tail_size)) if tail_size > 1 else np.array([1.0])
            beta[~mask] = share * tail_mags * rng.choice((-1.0, 1.0), size=tail_size)
        value = _cone_ratio(sigma, mask, s0, beta)
        best_values.append(value)
        candidates.append(beta)
    order = np.argsort(best_values)[:8]
    best = float(best_values[order[0]])
    for idx in order:
        _, refined = _refine_candidate(sigma, mask, s0, candidates[idx])
        best = min(best, refined)
    return best


# ---------------------------------------------------------------------------
# Monte Carlo checks on a fixed design
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcentrationCheck:
    frequency: float
    level: float
    bound: float
    t: float
    reps: int


def concentration_event_frequency(cfg: SimConfig, t: float, reps: int,
                                  seed: int = 0) -> ConcentrationCheck:
    """Fraction of noise replications on one fixed design for which the
    max design-noise correlation stays below the concentration level.

    Compared against the analytic lower bound ``1 - 2 exp(-t^2 / 2)``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    data = gen_synthetic(cfg)
    split = split_by_arm(data)
    x0, x1, n = split.x0, split.x1, split.n_total
    gram1 = gram(x1, n)
    scale = composite_noise_scale(x0, x1, cfg.noise_sd, cfg.noise_sd)
    level = concentration_level(max_column_scale(gram1), scale, t, n, data.p)
    # step-one leakage operator, precomputed once for the fixed design
    leak = x1 @ pseudoinverse(x0.T @ x0) @ x0.T
    hits = 0
    for r in range(reps):
        rng = rng_stream(seed + r, "concentration-noise")
        eps1 = cfg.noise_sd * rng.standard_normal(split.m1)
        eps0 = cfg.noise_sd * rng.standard_normal(split.m0)
        eps = eps1 - leak @ eps0
        stat = 2.0 * float(np.max(np.abs(x1.T @ eps))) / n
        if stat <= level:
            hits += 1
    return ConcentrationCheck(
        frequency=hits / reps,
        level=level,
        bound=1.0 - 2.0 * math.exp(-t * t / 2.0),
        t=t,
        reps=reps,
    )


@dataclass(frozen=True)
class OracleCheck:
    frequency: float
    lam: float
    l1_bound: float
    pred_bound: float
    phi0_sq: float
    bound: float
    reps: int


def oracle_inequality_frequency(cfg: SimConfig, t: float, reps: int,
                                seed: int = 0, delta: float = 0.5,
                                budget: int = 10_000) -> OracleCheck:
    """Fraction of noise replications on one fixed design for which the
    fitted difference vector satisfies both oracle error bounds at the
    theory-prescribed penalty.

    Compared against the analytic lower bound ``1 - 2 exp(-t^2)``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    data = gen_synthetic(cfg)
    split = split_by_arm(data)
    x0, x1, n = split.x0, split.x1, split.n_total
    beta1 = data.truth.beta1.values
    beta0 = data.truth.beta0.values
    beta_diff = data.truth.beta_diff
    support = np.flatnonzero(beta_diff)
    s0 = int(support.size)
    gram1 = gram(x1, n)
    scale = composite_noise_scale(x0, x1, cfg.noise_sd, cfg.noise_sd)
    lam = theoretical_penalty(max_column_scale(gram1), scale, t, n, data.p)
    phi0_sq = compatibility_constant(gram1, support, budget=budget, seed=seed)
    l1_bound, pred_bound = oracle_error_bounds(lam, s0, phi0_sq)
    mean1 = x1 @ beta1
    mean0 = x0 @ beta0
    hits = 0
    for r in range(reps):
        rng = rng_stream(seed + r, "oracle-noise")
        y1 = mean1 + cfg.noise_sd * rng.standard_normal(split.m1)
        y0 = mean0 + cfg.noise_sd * rng.standard_normal(split.m0)
        fresh = type(split)(x1=x1, y1=y1, x0=x0, y0=y0, n_total=n)
        model = fit_cate_lasso(fresh, FitOptions(lam=lam, delta=delta))
        err = model.beta_diff.values - beta_diff
        l1 = float(np.abs(err).sum())
        pred = float(np.sum((x1 @ err) ** 2)) / n
        if l1 <= l1_bound and pred <= pred_bound:
            hits += 1
    return OracleCheck(
        frequency=hits / reps,
        lam=lam,
        l1_bound=l1_bound,
        pred_bound=pred_bound,
        phi0_sq=phi0_sq,
        bound=1.0 - 2.0 * math.exp(-t * t),
        reps=reps,
    )


# ---------------------------------------------------------------------------
# Per-dataset report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoryReport:
    """Diagnostic quantities for one dataset; serializes to JSON.

    The compatibility fields are null when the dimension exceeds the cone
    search limit.
    """

    sigma_dagger: float
    m_bound: float
    lambda_theory: float
    trace_value: float
    s0: int
    t: float
    phi0_sq_lower: Optional[float] = None
    l1_bound: Optional[float] = None
    pred_bound: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "sigma_dagger": self.sigma_dagger,
            "m_bound": self.m_bound,
            "lambda_theory": self.lambda_theory,
            "trace_value": self.trace_value,
            "s0": self.s0,
            "t": self.t,
            "phi0_sq_lower": self.phi0_sq_lower,
            "l1_bound": self.l1_bound,
            "pred_bound": self.pred_bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def build_theory_report(data: ObservationSet, noise_sd: float, t: float = 2.0,
                        budget: int = 10_000, seed: int = 0) -> TheoryReport:
    """Assemble the diagnostic report for one dataset.

    Uses the ground-truth difference support when available; otherwise the
    compatibility fields stay null, as they do when p exceeds the cone
    search limit.
    """
    split = split_by_arm(data)
    x0, x1, n = split.x0, split.x1, split.n_total
    gram1 = gram(x1, n)
    column_scale = max_column_scale(gram1)
    trace = trace_pseudo_product(x0, x1)
    scale = math.sqrt(noise_sd**2 + noise_sd**2 * trace.trace)
    lam = theoretical_penalty(column_scale, scale, t, n, data.p)
    phi0_sq = l1_bound = pred_bound = None
    s0 = data.truth.s0 if data.truth is not None else 0
    if data.truth is not None and data.p <= MAX_COMPAT_DIM:
        support = np.flatnonzero(data.truth.beta_diff)
        if support.size:
            phi0_sq = compatibility_constant(gram1, support, budget=budget, seed=seed)
            l1_bound, pred_bound = oracle_error_bounds(lam, int(support.size), phi0_sq)
    return TheoryReport(
        sigma_dagger=scale,
        m_bound=column_scale,
        lambda_theory=lam,
        trace_value=trace.trace,
        s0=s0,
        t=t,
        phi0_sq_lower=phi0_sq,
        l1_bound=l1_bound,
        pred_bound=pred_bound,
    )
