"""Dense linear-algebra primitives: SVD pseudoinverse, minimum-norm least
squares, Gram matrices, and the cross-design trace product.

Everything here is a pure function over immutable inputs. The pseudoinverse
goes through a full SVD with the standard rank cutoff
``sigma_i > eps * max(m, p) * sigma_max`` rather than normal-equation
inversion, because the control-arm Gram matrix is singular whenever the
dimension exceeds the arm size, which is the regime of interest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonFiniteProductError


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD of a matrix, truncated at the rank tolerance.

    ``u`` is m x r with orthonormal columns, ``v`` is p x r with orthonormal
    columns, and ``singular_values`` holds the r retained values in
    descending order, all strictly above ``rank_tolerance``.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray
    rank_tolerance: float

    @property
    def rank(self) -> int:
        return self.singular_values.shape[0]


def svd_factors(a: np.ndarray, rank_tolerance: float | None = None) -> SvdFactors:
    """Compute the rank-truncated thin SVD of ``a``.

    When ``rank_tolerance`` is omitted it defaults to
    ``eps * max(m, p) * sigma_max``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if rank_tolerance is None:
        smax = s[0] if s.size else 0.0
        rank_tolerance = float(np.finfo(np.float64).eps * max(a.shape) * smax)
    r = int(np.count_nonzero(s > rank_tolerance))
    return SvdFactors(
        u=u[:, :r], singular_values=s[:r], v=vt[:r].T, rank_tolerance=float(rank_tolerance)
    )


def pseudoinverse(a: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD; the zero matrix maps to zero."""
    f = svd_factors(a)
    if f.rank == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    return (f.v / f.singular_values) @ f.u.T


def min_norm_lsq(a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution ``a^+ y``.

    Among all minimizers of ``||y - a b||_2`` this returns the one with the
    smallest Euclidean norm; when ``a`` has full row rank it interpolates
    ``y`` exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.shape[0] != y.shape[0]:
        raise ValueError(f"design has {a.shape[0]} rows but target has {y.shape[0]}")
    f = svd_factors(a)
    if f.rank == 0:
        return np.zeros(a.shape[1])
    return f.v @ ((f.u.T @ y) / f.singular_values)


def gram(a: np.ndarray, normalizer: int) -> np.ndarray:
    """Normalized Gram matrix ``a^T a / normalizer`` (exactly symmetric)."""
    if normalizer < 1:
        raise ValueError("normalizer must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    g = a.T @ a / float(normalizer)
    return (g + g.T) * 0.5


class TraceProduct(NamedTuple):
    """Trace of the cross-design pseudoinverse product, plus the largest
    absolute entry of the product matrix (the finiteness diagnostic for the
    design-discrepancy condition)."""

    trace: float
    max_abs_entry: float


def trace_pseudo_product(x0: np.ndarray, x1: np.ndarray) -> TraceProduct:
    """Compute ``tr((x0^T x0)^+ (x1^T x1))`` and the product's max entry."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape[1] != x1.shape[1]:
        raise ValueError("both designs must have the same number of columns")
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(x1))):
        raise NonFiniteProductError("designs contain non-finite entries")
    product = pseudoinverse(x0.T @ x0) @ (x1.T @ x1)
    if not np.all(np.isfinite(product)):
        raise NonFiniteProductError("cross-design product has non-finite entries")
    return TraceProduct(
        trace=float(np.trace(product)),
        max_abs_entry=float(np.max(np.abs(product))) if product.size else 0.0,
    )
