"""Data-generating processes for the benchmark studies.

Two families: a synthetic design with logistic treatment assignment and
arm-specific coefficients on the first ``s0`` coordinates, and a
semi-synthetic design over low-dimensional surrogate covariates with a
constant additive treatment effect of 4, optionally extended with
high-dimensional shared covariates.

All randomness flows through named substreams derived from ``(seed, label)``
so that the same configuration always produces the bit-identical dataset,
regardless of which other streams were consumed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import CoefVector, GroundTruth, ObservationSet
from .errors import CsvParseError, MissingTreatmentColumnError

COMMON_MODES = ("paper_literal", "dense_common")
IHDP_EXTENSIONS = ("none", "setting1", "setting2")

# Assignment probabilities computed through the logistic map are clamped
# into the representable open interval; at large dimension the linear index
# overflows what float64 can distinguish from 0 or 1.
_PROPENSITY_CLIP = 1e-12


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Deterministic generator for the substream named ``label``.

    Streams with different labels are statistically independent and every
    (seed, label) pair reproduces the same draws across runs and platforms.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), key])))


@dataclass(frozen=True)
class SimConfig:
    """Synthetic design: n units, p covariates (intercept first), s0
    arm-specific coordinates.

    ``common_mode`` controls the shared tail of the coefficient vectors:
    ``dense_common`` draws one dense vector used by both arms (each arm is
    non-sparse but the difference has at most s0 nonzeros), while
    ``paper_literal`` zeroes the tail of both arms. ``coef_range`` is the
    half-width of the uniform law for the arm-specific coordinates.
    """

    n: int = 500
    p: int = 300
    s0: int = 10
    seed: int = 0
    common_mode: str = "dense_common"
    noise_sd: float = 1.0
    coef_range: float = 10.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 1 <= self.s0 <= self.p:
            raise ValueError("s0 must lie in [1, p]")
        if self.common_mode not in COMMON_MODES:
            raise ValueError(f"unknown common_mode {self.common_mode!r}")
        if self.noise_sd < 0.0:
            raise ValueError("noise_sd must be >= 0")


def gen_synthetic(cfg: SimConfig) -> ObservationSet:
    """Draw one dataset from the synthetic design.

    Coefficients: the first s0 entries of each arm's vector are i.i.d.
    uniform on [-coef_range, coef_range], drawn independently per arm; the
    remaining p - s0 entries are zero (``paper_literal``) or one shared
    uniform draw (``dense_common``). Covariates are (1, V) with V standard
    normal. Assignment uses p(D=1|X_i) = logistic(X_i' theta + eta_i) with
    theta uniform on [-1, 1]^p and eta_i standard normal; the realized
    probabilities are stored as ground-truth propensities. Potential
    outcomes are X' beta_d + noise_sd * eps_d, and the observed outcome is
    the one matching the drawn assignment.
    """
    n, p, s0 = cfg.n, cfg.p, cfg.s0
    rng_coef = rng_stream(cfg.seed, "coefficients")
    beta1 = np.zeros(p)
    beta0 = np.zeros(p)
    beta1[:s0] = rng_coef.uniform(-cfg.coef_range, cfg.coef_range, s0)
    beta0[:s0] = rng_coef.uniform(-cfg.coef_range, cfg.coef_range, s0)
    if cfg.common_mode == "dense_common":
        common = rng_coef.uniform(-cfg.coef_range, cfg.coef_range, p - s0)
        beta1[s0:] = common
        beta0[s0:] = common

    theta = rng_stream(cfg.seed, "assignment-model").uniform(-1.0, 1.0, p)
    x = np.empty((n, p))
    x[:, 0] = 1.0
    x[:, 1:] = rng_stream(cfg.seed, "covariates").standard_normal((n, p - 1))
    eta = rng_stream(cfg.seed, "assignment-noise").standard_normal(n)
    prop = 1.0 / (1.0 + np.exp(-(x @ theta) + eta))
    prop = np.clip(prop, _PROPENSITY_CLIP, 1.0 - _PROPENSITY_CLIP)
    d = (rng_stream(cfg.seed, "assignment").uniform(size=n) < prop).astype(np.int64)

    rng_eps = rng_stream(cfg.seed, "outcome-noise")
    y1 = x @ beta1 + cfg.noise_sd * rng_eps.standard_normal(n)
    y0 = x @ beta0 + cfg.noise_sd * rng_eps.standard_normal(n)
    y = np.where(d == 1, y1, y0)

    truth = GroundTruth(
        beta1=CoefVector(beta1, role="arm1"),
        beta0=CoefVector(beta0, role="arm0"),
        s0=s0,
        propensities=prop,
    )
    return ObservationSet(covariates=x, treatments=d, outcomes=y, truth=truth)


@dataclass(frozen=True)
class IhdpConfig:
    """Semi-synthetic design over 25 surrogate (or CSV-loaded) covariates.

    The outcome surface adds a constant treatment effect of 4 on top of a
    shared linear term; ``setting1``/``setting2`` append ``extra_dim``
    shared covariates with coefficients uniform on [0, 5] or [0, 10]. An
    intercept column of ones is prepended so the constant effect is encoded
    as a coefficient difference.
    """

    source: str = "synthetic_surrogate"
    csv: Optional[str] = None
    extension: str = "none"
    extra_dim: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.source not in ("synthetic_surrogate", "csv_path"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.source == "csv_path" and not self.csv:
            raise ValueError("source 'csv_path' requires a csv file path")
        if self.extension not in IHDP_EXTENSIONS:
            raise ValueError(f"unknown extension {self.extension!r}")
        if self.extension != "none" and self.extra_dim < 1:
            raise ValueError("extensions require extra_dim >= 1")


def _load_ihdp_covariates(path):
    """Read a covariate CSV: optional treatment column named ``d`` or
    ``treatment``, every other column treated as a covariate."""
    import csv as _csv
    from pathlib import Path

    try:
        with Path(path).open(newline="") as fh:
            reader = _csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise CsvParseError(f"{path}: {exc}") from exc
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    d_col = next((j for j, h in enumerate(header) if h.lower() in ("d", "treatment")), None)
    cov_cols = [j for j in range(len(header)) if j != d_col]
    try:
        x = np.array([[float(row[j]) for j in cov_cols] for row in rows])
        d = None if d_col is None else np.array([int(float(row[d_col])) for row in rows])
    except (ValueError, IndexError) as exc:
        raise CsvParseError(f"{path}: {exc}") from exc
    return x, d


def gen_ihdp_surface_a(cfg: IhdpConfig) -> ObservationSet:
    """Draw one semi-synthetic dataset with a constant effect of 4.

    Surrogate covariates are 747 rows of 6 continuous standard normals and
    19 Bernoulli(0.5) indicators; base coefficients are sampled from
    (0, 1, 2, 3, 4) with probabilities (0.5, 0.2, 0.15, 0.1, 0.05). When no
    treatment column is available, assignment is Bernoulli(0.5) and those
    propensities are recorded as ground truth.
    """
    rng_cov = rng_stream(cfg.seed, "ihdp-covariates")
    d_loaded = None
    if cfg.source == "csv_path":
        base_x, d_loaded = _load_ihdp_covariates(cfg.csv)
    else:
        n = 747
        cont = rng_cov.standard_normal((n, 6))
        binary = (rng_cov.uniform(size=(n, 19)) < 0.5).astype(np.float64)
        base_x = np.hstack([cont, binary])
    n = base_x.shape[0]

    rng_beta = rng_stream(cfg.seed, "ihdp-coefficients")
    beta_base = rng_beta.choice(
        np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
        size=base_x.shape[1],
        p=[0.5, 0.2, 0.15, 0.1, 0.05],
    )
    mean = base_x @ beta_base
    blocks = [np.ones((n, 1)), base_x]
    coef_blocks = [np.array([0.0]), beta_base]
    if cfg.extension != "none":
        rng_ext = rng_stream(cfg.seed, "ihdp-extension")
        high = 5.0 if cfg.extension == "setting1" else 10.0
        z = rng_ext.uniform(-1.0, 1.0, (n, cfg.extra_dim))
        beta_z = rng_ext.uniform(0.0, high, cfg.extra_dim)
        mean = mean + z @ beta_z
        blocks.append(z)
        coef_blocks.append(beta_z)
    x = np.hstack(blocks)
    beta0_full = np.concatenate(coef_blocks)
    beta1_full = beta0_full.copy()
    beta1_full[0] += 4.0

    if d_loaded is not None:
        if not np.all(np.isin(d_loaded, (0, 1))):
            raise MissingTreatmentColumnError("treatment column must be binary 0/1")
        d = d_loaded.astype(np.int64)
        prop = None
    else:
        d = (rng_stream(cfg.seed, "ihdp-assignment").uniform(size=n) < 0.5).astype(np.int64)
        prop = np.full(n, 0.5)

    rng_eps = rng_stream(cfg.seed, "ihdp-outcome-noise")
    y1 = rng_eps.normal(mean + 4.0, 1.0)
    y0 = rng_eps.normal(mean, 1.0)
    y = np.where(d == 1, y1, y0)

    truth = GroundTruth(
        beta1=CoefVector(beta1_full, role="arm1"),
        beta0=CoefVector(beta0_full, role="arm0"),
        s0=1,
        propensities=prop,
    )
    return ObservationSet(covariates=x, treatments=d, outcomes=y, truth=truth)


def draw_fresh_covariates(cfg, count: int, seed: int) -> np.ndarray:
    """Draw new covariate rows from the same covariate law as ``cfg``.

    Used for out-of-sample effect evaluation; coefficients are not redrawn.
    """
    if isinstance(cfg, SimConfig):
        rng = rng_stream(seed, "holdout-covariates")
        x = np.empty((count, cfg.p))
        x[:, 0] = 1.0
        x[:, 1:] = rng.standard_normal((count, cfg.p - 1))
        return x
    if isinstance(cfg, IhdpConfig):
        if cfg.source != "synthetic_surrogate":
            raise ValueError("fresh covariates need the surrogate covariate law")
        rng = rng_stream(seed, "holdout-covariates")
        cont = rng.standard_normal((count, 6))
        binary = (rng.uniform(size=(count, 19)) < 0.5).astype(np.float64)
        blocks = [np.ones((count, 1)), cont, binary]
        if cfg.extension != "none":
            blocks.append(rng.uniform(-1.0, 1.0, (count, cfg.extra_dim)))
        return np.hstack(blocks)
    raise TypeError(f"unsupported config type {type(cfg).__name__}")
