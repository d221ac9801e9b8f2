"""
Best uniform approximation from the span of a fixed basis.

The problem is linear in the coefficients, so it is solved as the epigraph
linear program

    min t  subject to  -t <= f(z_i) - sum_j c_j g_j(z_i) <= t

on a logarithmic grid with scipy's HiGHS dual simplex. Each round the LP is
re-centred on the best coefficients so far, the residual's refined peaks are
added to the grid, and every candidate is certified by `sup_norm`. The
returned error is the certified one, so a warm start is never made worse.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import Field, model_validator
from scipy.optimize import linprog
from typing_extensions import Self

from ratgreedy.analysis import GridSpec, SupNorm, check_distinct, log_grid, sup_norm
from ratgreedy.domain import Approximant, Element, FloatArray, FrozenModel, Interval

logger = logging.getLogger(__name__)

_LP_FEASIBILITY_TOL = 1e-10


class MinimaxProblem(FrozenModel):
    """min over c of max_z |f(z) - sum_i c_i g_i(z)| on `on`."""

    f: Callable[..., Any]
    basis: Tuple[Element, ...]
    on: Interval
    init: Optional[Tuple[float, ...]] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    tol: float = Field(1e-10, gt=0.0)
    max_rounds: int = Field(10, ge=1)
    max_exchange: int = Field(200, ge=1, description="LP pivots allowed per basis element")

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not self.basis:
            raise ValueError("minimax basis must be non-empty")
        check_distinct(self.basis)
        if self.init is not None and len(self.init) != len(self.basis):
            raise ValueError(
                f"warm start has {len(self.init)} entries for {len(self.basis)} basis elements"
            )
        return self


class MinimaxResult(NamedTuple):
    coeffs: FloatArray
    error: float
    converged: bool
    rounds: int
    argmax: float


def _design(basis: Tuple[Element, ...], z: FloatArray) -> FloatArray:
    return Approximant(basis=basis, coeffs=(0.0,) * len(basis)).design_matrix(z)


def _solve_epigraph(
    design: FloatArray, residual: FloatArray, max_iter: int
) -> Optional[Tuple[FloatArray, float]]:
    """Correction delta minimizing max |residual - design @ delta| on the grid."""
    k = design.shape[1]
    r_scale = float(np.max(np.abs(residual)))
    if r_scale == 0.0:
        return np.zeros(k), 0.0
    col_scale = np.max(np.abs(design), axis=0)
    col_scale[col_scale == 0.0] = 1.0
    scaled = design / col_scale
    rhs = residual / r_scale

    ones = np.ones((scaled.shape[0], 1))
    a_ub = np.vstack((np.hstack((-scaled, -ones)), np.hstack((scaled, -ones))))
    b_ub = np.concatenate((-rhs, rhs))
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * k + [(0.0, None)]

    result = linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=bounds,
        method="highs-ds",
        options={
            "maxiter": max_iter,
            "primal_feasibility_tolerance": _LP_FEASIBILITY_TOL,
            "dual_feasibility_tolerance": _LP_FEASIBILITY_TOL,
        },
    )
    if result.x is None:
        logger.debug("Epigraph LP returned no point (status %s: %s)", result.status, result.message)
        return None
    if result.status != 0:
        logger.debug("Epigraph LP stopped early: %s", result.message)
    x = np.asarray(result.x, dtype=float)
    return x[:k] * r_scale / col_scale, float(x[-1]) * r_scale


def best_uniform_coeffs(prob: MinimaxProblem) -> MinimaxResult:
    """Coefficients minimizing the uniform error, with the certified error."""
    f, basis, on, grid = prob.f, prob.basis, prob.on, prob.grid
    k = len(basis)

    def certify(coeffs: FloatArray) -> SupNorm:
        return sup_norm(lambda z: np.asarray(f(z), dtype=float) - _design(basis, z) @ coeffs, on, grid)

    z = log_grid(on, grid.n_points)
    design = _design(basis, z)
    fz = np.asarray(f(z), dtype=float)

    # Candidates: discrete least squares, then the warm start (kept on ties).
    col_scale = np.max(np.abs(design), axis=0)
    col_scale[col_scale == 0.0] = 1.0
    best_c = np.linalg.lstsq(design / col_scale, fz, rcond=None)[0] / col_scale
    best = certify(best_c)
    z = np.union1d(z, best.peaks)
    if prob.init is not None:
        init_c = np.asarray(prob.init, dtype=float)
        init_cert = certify(init_c)
        z = np.union1d(z, init_cert.peaks)
        if init_cert.value <= best.value:
            best_c, best = init_c, init_cert

    converged = False
    rounds = 0
    previous = best.value
    for rounds in range(1, prob.max_rounds + 1):
        design = _design(basis, z)
        fz = np.asarray(f(z), dtype=float)
        solution = _solve_epigraph(design, fz - design @ best_c, prob.max_exchange * (k + 1))
        if solution is None:
            break
        delta, lower = solution
        candidate = best_c + delta
        cert = certify(candidate)
        logger.debug(
            "Minimax round %d: grid %d points, LP bound %.6e, certified %.6e",
            rounds,
            z.size,
            lower,
            cert.value,
        )
        if cert.value < best.value:
            best_c, best = candidate, cert

        scale = max(1.0, best.value)
        if cert.value - lower <= prob.tol * scale:
            converged = True
            break
        if rounds > 1 and abs(previous - best.value) <= prob.tol * scale:
            converged = True
            break
        previous = best.value
        z = np.union1d(z, cert.peaks)

    if not converged:
        logger.warning(
            "Minimax did not converge in %d rounds; returning best certified error %.6e",
            rounds,
            best.value,
        )
    return MinimaxResult(best_c, best.value, converged, rounds, best.argmax)


def minimax_approximant(
    f: Callable[..., Any],
    basis: Tuple[Element, ...],
    on: Interval,
    init: Optional[Any] = None,
    grid: GridSpec = GridSpec(),
    fit: Optional[Interval] = None,
) -> Tuple[Approximant, MinimaxResult]:
    """Solve the minimax problem and wrap the coefficients as an Approximant."""
    prob = MinimaxProblem(
        f=f,
        basis=basis,
        on=on,
        init=None if init is None else tuple(float(c) for c in init),
        grid=grid,
    )
    result = best_uniform_coeffs(prob)
    return Approximant(basis=basis, coeffs=tuple(result.coeffs), fit=fit), result
