"""
Rational and exact matrix functions applied to dense SPD matrices.

R(A) b = c0 b + sum_j r_j (A - p_j I)^{-1} b is computed with one Cholesky
factorization per pole; f(A) b = V f(Lambda) V^T b from the symmetric
eigendecomposition serves as the oracle.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh
from scipy.sparse.linalg import LinearOperator

from ratgreedy.analysis import GridSpec, sup_norm
from ratgreedy.domain import Approximant, FloatArray, Interval, PartialFraction
from ratgreedy.errors import (
    DomainError,
    EigenSolverError,
    FactorizationError,
    UnsupportedConversionError,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
BOUND_SLACK = 1e-8


class SpdMatrix:
    """
    Dense symmetric positive definite matrix with its eigendecomposition.

    Arrays are read-only after construction.
    """

    def __init__(self, matrix: Any):
        a = np.array(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {a.shape}")
        scale = max(float(np.max(np.abs(a))), 1.0)
        if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
            raise DomainError("matrix is not symmetric")
        try:
            eigvals, eigvecs = eigh(a)
        except (LinAlgError, ValueError) as exc:
            raise EigenSolverError(f"eigendecomposition failed: {exc}") from exc
        if not eigvals[0] > 0.0:
            raise DomainError(f"matrix is not positive definite (lambda_min = {eigvals[0]:.3e})")
        for arr in (a, eigvals, eigvecs):
            arr.setflags(write=False)
        self.matrix = a
        self.eigenvalues = eigvals
        self.eigenvectors = eigvecs

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def spectrum(self) -> Interval:
        """[lambda_min, lambda_max], widened slightly when the spectrum is a point."""
        lo, hi = self.lambda_min, self.lambda_max
        if hi <= lo:
            hi = lo * (1.0 + 1e-12)
        return Interval(lo=lo, hi=hi)

    def spectral_apply(self, values: FloatArray, b: Any) -> FloatArray:
        """V diag(values) V^T b."""
        v = self.eigenvectors
        return v @ (values * (v.T @ np.asarray(b, dtype=float)))


def to_partial_fraction(phi: Approximant) -> PartialFraction:
    """Residues fold in the normalization scale; greedy approximants have c0 = 0."""
    for g in phi.basis:
        if not g.is_pole:
            raise UnsupportedConversionError(
                f"{g.kind.value} element cannot be written as a partial fraction"
            )
    return PartialFraction(
        c0=0.0,
        residues=tuple(c * g.scale for c, g in zip(phi.coeffs, phi.basis)),
        poles=tuple(g.param for g in phi.basis),
    )


class ShiftedSolver:
    """Applies R(A) with cached Cholesky factors of A - p I, one per pole."""

    def __init__(self, a: SpdMatrix, pf: PartialFraction):
        self.a = a
        self.pf = pf
        self._factors: Dict[float, Any] = {}
        for pole in pf.poles:
            self._factor(pole)

    def _factor(self, pole: float) -> Any:
        if pole not in self._factors:
            shifted = np.array(self.a.matrix) - pole * np.eye(self.a.n)
            try:
                self._factors[pole] = cho_factor(shifted, lower=True, check_finite=True)
            except LinAlgError as exc:
                raise FactorizationError(f"A - ({pole:.6e}) I is not positive definite") from exc
        return self._factors[pole]

    def apply(self, b: Any) -> FloatArray:
        b_arr = np.asarray(b, dtype=float)
        out = self.pf.c0 * b_arr
        for residue, pole in zip(self.pf.residues, self.pf.poles):
            out = out + residue * cho_solve(self._factor(pole), b_arr)
        return out

    def as_linear_operator(self) -> LinearOperator:
        n = self.a.n
        return LinearOperator((n, n), matvec=self.apply, dtype=float)


def apply_rational(a: SpdMatrix, b: Any, pf: PartialFraction) -> FloatArray:
    """c0 b + sum_j r_j (A - p_j I)^{-1} b."""
    return ShiftedSolver(a, pf).apply(b)


def apply_exact(a: SpdMatrix, b: Any, f: Callable[..., Any]) -> FloatArray:
    """V f(Lambda) V^T b."""
    values = np.asarray(f(a.eigenvalues), dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("target is not finite on the spectrum")
    return a.spectral_apply(values, b)


class OperatorBound(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def check_operator_bound(
    a: SpdMatrix,
    b: Any,
    f: Callable[..., Any],
    pf: PartialFraction,
    grid: Optional[GridSpec] = None,
) -> OperatorBound:
    """
    ||f(A) b - R(A) b|| against max |f - R| over [lambda_min, lambda_max] times ||b||.

    The maximum also covers the eigenvalues themselves, so grid refinement
    cannot under-estimate it on the points that matter.
    """
    b_arr = np.asarray(b, dtype=float)
    lhs = float(np.linalg.norm(apply_exact(a, b_arr, f) - apply_rational(a, b_arr, pf)))

    def residual(z: FloatArray) -> FloatArray:
        return np.asarray(f(z), dtype=float) - pf(z)

    on_spectrum = float(np.max(np.abs(residual(a.eigenvalues))))
    if a.lambda_max > a.lambda_min:
        on_spectrum = max(on_spectrum, sup_norm(residual, a.spectrum, grid or GridSpec()).value)
    b_norm = float(np.linalg.norm(b_arr))
    rhs = on_spectrum * b_norm

    # Round-off in the two applications is of order eps * (||f(A)|| + ||R(A)||) ||b||.
    scale = float(np.max(np.abs(np.asarray(f(a.eigenvalues), dtype=float)))) + float(
        np.max(np.abs(pf(a.eigenvalues)))
    )
    allowance = 64.0 * np.finfo(float).eps * a.n * scale * b_norm
    holds = lhs <= rhs * (1.0 + BOUND_SLACK) + allowance
    if not holds:
        logger.warning("Operator bound violated: lhs=%.6e rhs=%.6e", lhs, rhs)
    return OperatorBound(lhs, rhs, bool(holds))


def shift_min_eigenvalue(a: SpdMatrix, pole: float) -> float:
    """Smallest eigenvalue of A - p I, which is lambda_min + |p| for p < 0."""
    if not pole < 0.0 or not math.isfinite(pole):
        raise DomainError(f"pole must be negative, got {pole}")
    return float(eigh(np.array(a.matrix) - pole * np.eye(a.n), eigvals_only=True)[0])
