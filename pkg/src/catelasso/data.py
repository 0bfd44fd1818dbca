"""Observation data model, treated/control split, and identification diagnostics.

The observed sample is n triples (Y_i, D_i, X_i) with a binary treatment
indicator D_i. All containers are immutable after construction (the wrapped
arrays are marked read-only) and safe to share between threads.

CSV schema: header row with columns ``y``, ``d``, then ``x1..xp``. Ground
truth travels in a sidecar JSON file, not in the CSV; any ``beta1_*`` /
``beta0_*`` columns in a CSV are ignored on load.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    CsvParseError,
    EmptyArmError,
    MissingPropensityError,
)

COEF_ROLES = ("beta_diff", "arm0", "arm1")


def _readonly(a, dtype=np.float64):
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CoefVector:
    """A length-p coefficient vector tagged with its role.

    Roles: ``beta_diff`` (the treatment-effect difference), ``arm0`` and
    ``arm1`` (per-arm outcome models).
    """

    values: np.ndarray
    role: str = "beta_diff"

    def __post_init__(self):
        if self.role not in COEF_ROLES:
            raise ValueError(f"unknown coefficient role {self.role!r}")
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficient vector contains non-finite entries")
        object.__setattr__(self, "values", _readonly(v))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class GroundTruth:
    """True per-arm coefficients of a simulated dataset.

    ``s0`` is the number of arm-specific coordinates; the index set where
    ``beta1`` and ``beta0`` differ can never be larger than it. Propensities,
    when present, are the assignment probabilities used to draw D and must
    lie strictly inside (0, 1).
    """

    beta1: CoefVector
    beta0: CoefVector
    s0: int
    propensities: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.beta1.values.shape != self.beta0.values.shape:
            raise ValueError("beta1 and beta0 must have equal length")
        if not 0 <= self.s0 <= len(self.beta1):
            raise ValueError("s0 must lie in [0, p]")
        diff_support = int(np.count_nonzero(self.beta1.values != self.beta0.values))
        if diff_support > self.s0:
            raise ValueError(
                f"beta1 and beta0 differ on {diff_support} coordinates, more than s0={self.s0}"
            )
        if self.propensities is not None:
            prop = np.asarray(self.propensities, dtype=np.float64).reshape(-1)
            if prop.size and not (np.all(prop > 0.0) and np.all(prop < 1.0)):
                raise ValueError("propensities must lie strictly in (0, 1)")
            object.__setattr__(self, "propensities", _readonly(prop))

    @property
    def beta_diff(self) -> np.ndarray:
        return self.beta1.values - self.beta0.values


@dataclass(frozen=True)
class ObservationSet:
    """The observed sample: covariate matrix, treatments, outcomes.

    Invariants enforced at construction: treatments are exactly 0/1 with at
    least one observation in each arm, and covariates/outcomes are finite.
    Rows with non-finite values are rejected, never imputed.
    """

    covariates: np.ndarray
    treatments: np.ndarray
    outcomes: np.ndarray
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("covariates must be an n x p matrix")
        d = np.asarray(self.treatments)
        y = np.asarray(self.outcomes, dtype=np.float64).reshape(-1)
        n = x.shape[0]
        if d.shape != (n,) or y.shape != (n,):
            raise ValueError("treatments and outcomes must have length n")
        if not np.all(np.isin(d, (0, 1))):
            raise ValueError("treatments must be binary 0/1")
        d = d.astype(np.int64)
        m1 = int(d.sum())
        if m1 == 0 or m1 == n:
            raise EmptyArmError(f"need both arms non-empty, got m1={m1} of n={n}")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates contain non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcomes contain non-finite entries")
        if self.truth is not None and len(self.truth.beta1) != x.shape[1]:
            raise ValueError("ground-truth coefficient length must equal p")
        if self.truth is not None and self.truth.propensities is not None:
            if self.truth.propensities.shape != (n,):
                raise ValueError("ground-truth propensities must have length n")
        object.__setattr__(self, "covariates", _readonly(x))
        object.__setattr__(self, "treatments", _readonly(d, dtype=np.int64))
        object.__setattr__(self, "outcomes", _readonly(y))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.treatments.sum())


@dataclass(frozen=True)
class ArmSplit:
    """Per-arm design blocks of an observation set.

    Row order inside each arm preserves the original index order.
    ``n_total`` is carried along because the two-step objective normalizes
    both squared-loss terms by the full sample size, not by arm size.
    """

    x1: np.ndarray
    y1: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    n_total: int

    def __post_init__(self):
        if self.x1.shape[0] + self.x0.shape[0] != self.n_total:
            raise ValueError("arm sizes must add up to n_total")
        if self.x1.shape[1] != self.x0.shape[1]:
            raise ValueError("both arms must share the covariate dimension")
        for name in ("x1", "y1", "x0", "y0"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def m1(self) -> int:
        return self.x1.shape[0]

    @property
    def m0(self) -> int:
        return self.x0.shape[0]

    @property
    def p(self) -> int:
        return self.x1.shape[1]


def split_by_arm(data: ObservationSet) -> ArmSplit:
    """Partition an observation set into treated and control blocks.

    Returns the treated design/outcomes and control design/outcomes, each in
    original row order, plus the total sample size.
    """
    mask = data.treatments == 1
    return ArmSplit(
        x1=data.covariates[mask],
        y1=data.outcomes[mask],
        x0=data.covariates[~mask],
        y0=data.outcomes[~mask],
        n_total=data.n,
    )


@dataclass(frozen=True)
class OverlapReport:
    """Result of the assignment-overlap diagnostic."""

    phi: float
    fraction_outside: float
    passed: bool
    n_checked: int


def check_overlap(
    data: ObservationSet,
    phi: float,
    propensities: Optional[np.ndarray] = None,
) -> OverlapReport:
    """Check that assignment probabilities stay inside (phi, 1 - phi).

    Uses the ground-truth propensities attached to ``data`` unless an
    explicit (e.g. fitted) vector is supplied. Passes iff no unit falls
    outside the band.
    """
    if not 0.0 < phi < 0.5:
        raise ValueError("phi must lie in (0, 0.5)")
    if propensities is None:
        if data.truth is None or data.truth.propensities is None:
            raise MissingPropensityError(
                "no propensities available: attach ground truth or pass a fitted vector"
            )
        prop = data.truth.propensities
    else:
        prop = np.asarray(propensities, dtype=np.float64).reshape(-1)
        if prop.shape != (data.n,):
            raise ValueError("propensity vector must have length n")
    outside = np.count_nonzero((prop <= phi) | (prop >= 1.0 - phi))
    frac = outside / data.n
    return OverlapReport(phi=phi, fraction_outside=frac, passed=outside == 0, n_checked=data.n)


# ---------------------------------------------------------------------------
# CSV / sidecar persistence
# ---------------------------------------------------------------------------

def save_csv(data: ObservationSet, path) -> None:
    """Write a dataset as ``y,d,x1..xp`` with full float round-trip precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y", "d"] + [f"x{j + 1}" for j in range(data.p)])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.outcomes[i])), str(int(data.treatments[i]))]
                + [repr(float(v)) for v in data.covariates[i]]
            )


def load_csv(path, truth: Optional[GroundTruth] = None) -> ObservationSet:
    """Load a dataset written by :func:`save_csv`.

    The header must start with ``y`` and ``d``; covariate columns are the
    ``x1..xp`` block in order. Columns named ``beta1_*``/``beta0_*`` are
    ignored (ground truth lives in the JSON sidecar).
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CsvParseError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise CsvParseError(f"{path}: {exc}") from exc
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "y" or header[1] != "d":
        raise CsvParseError(f"{path}: header must start with 'y','d', got {header[:3]}")
    keep = [
        j
        for j, name in enumerate(header)
        if j >= 2 and not (name.startswith("beta1_") or name.startswith("beta0_"))
    ]
    expected = [f"x{k + 1}" for k in range(len(keep))]
    names = [header[j] for j in keep]
    if names != expected:
        raise CsvParseError(f"{path}: covariate columns must be x1..xp in order, got {names[:4]}...")
    y, d, x = [], [], []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        try:
            y.append(float(row[0]))
            d.append(int(row[1]))
            x.append([float(row[j]) for j in keep])
        except (ValueError, IndexError) as exc:
            raise CsvParseError(f"{path}:{lineno}: {exc}") from exc
    if not y:
        raise CsvParseError(f"{path}: no data rows")
    return ObservationSet(
        covariates=np.asarray(x), treatments=np.asarray(d), outcomes=np.asarray(y), truth=truth
    )


def save_truth_json(truth: GroundTruth, path) -> None:
    """Write the ground-truth sidecar: ``{beta1, beta0, s0, propensities}``."""
    payload = {
        "beta1": [float(v) for v in truth.beta1.values],
        "beta0": [float(v) for v in truth.beta0.values],
        "s0": int(truth.s0),
        "propensities": None
        if truth.propensities is None
        else [float(v) for v in truth.propensities],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_truth_json(path) -> GroundTruth:
    """Load a ground-truth sidecar written by :func:`save_truth_json`."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CsvParseError(f"{path}: {exc}") from exc
    prop = payload.get("propensities")
    return GroundTruth(
        beta1=CoefVector(np.asarray(payload["beta1"]), role="arm1"),
        beta0=CoefVector(np.asarray(payload["beta0"]), role="arm0"),
        s0=int(payload["s0"]),
        propensities=None if prop is None else np.asarray(prop),
    )
