"""
Preconditioning study on a one-dimensional surrogate of the interface operator.

A = (1/h^2) tridiag(-1, 2, -1) + I (Dirichlet, h = 1/(n+1)) stands in for
-Delta + I, and S = mu^{-1} (A^{-1/2} + K A^{1/2}) is the fractional block.
Its inverse symbol mu (z^{-1/2} + K z^{1/2})^{-1} is rescaled to (0, 1],
approximated greedily, mapped back to a partial fraction in A and used as
the preconditioner of a Krylov solve of S x = b.
"""

from __future__ import annotations

import asyncio
import logging
import statistics
from enum import Enum
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, ValidationError, field_validator
from scipy.linalg import LinAlgError
from scipy.sparse.linalg import LinearOperator, cg, gmres

from ratgreedy.analysis import GridSpec, sup_norm
from ratgreedy.domain import (
    Approximant,
    FloatArray,
    FrozenModel,
    Interval,
    NormalizedPoleDictionary,
    PartialFraction,
    PlainPoleDictionary,
    PoleWindow,
    RescaledInterface,
)
from ratgreedy.errors import DomainError, RatGreedyError
from ratgreedy.greedy import (
    Algorithm,
    ImprovedMode,
    PsoConfig,
    StopRule,
    WcgaConfig,
    run_improved_oga,
    run_wcga,
)
from ratgreedy.operators import ShiftedSolver, SpdMatrix, to_partial_fraction
from ratgreedy.settings import get_settings

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# Surrogate operator and rescaling
# -----------------------------------------------------------------------------
class SurrogateOperator:
    """Discrete -Delta + I on (0, 1) together with the interface parameters mu, K."""

    def __init__(self, n: int, mu: float, K: float):
        if n < 1:
            raise DomainError(f"grid size must be positive, got {n}")
        if not (mu > 0.0 and K > 0.0):
            raise DomainError(f"mu and K must be positive, got mu={mu}, K={K}")
        h = 1.0 / (n + 1)
        laplacian = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
        self.n = n
        self.mu = float(mu)
        self.K = float(K)
        self.h = h
        self.a = SpdMatrix(laplacian + np.eye(n))

    def symbol(self, z: Any) -> FloatArray:
        """mu^{-1} (z^{-1/2} + K z^{1/2}), the eigenvalue map of S."""
        z_arr = np.asarray(z, dtype=float)
        return (1.0 + self.K * z_arr) / (self.mu * np.sqrt(z_arr))

    def inverse_symbol(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        return self.mu * np.sqrt(z_arr) / (1.0 + self.K * z_arr)

    def apply(self, x: Any) -> FloatArray:
        return self.a.spectral_apply(self.symbol(self.a.eigenvalues), x)

    def apply_inverse(self, x: Any) -> FloatArray:
        return self.a.spectral_apply(self.inverse_symbol(self.a.eigenvalues), x)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self.apply, dtype=float)


class RescaleParams(FrozenModel):
    """Spectral scale c >= lambda_max and gamma0 = max(c^{-1/2}, K c^{1/2})."""

    c: float = Field(..., gt=0.0)
    gamma0: float = Field(..., gt=0.0)

    @classmethod
    def for_operator(cls, op: SurrogateOperator) -> "RescaleParams":
        c = op.a.lambda_max
        return cls(c=c, gamma0=max(c**-0.5, op.K * c**0.5))


def rescale_target(mu: float, K: float, c: float) -> Tuple[RescaledInterface, float]:
    """f~ on (0, 1] and gamma0 with mu (z^{-1/2} + K z^{1/2})^{-1} = (mu/gamma0) f~(z/c)."""
    target = RescaledInterface(mu=mu, K=K, c=c)
    return target, target.gamma0


def spectral_safety_rule(
    f: Callable[..., Any],
    on: Interval,
    target: float,
    grid: GridSpec = GridSpec(),
    relative_bound: float = 0.3,
) -> StopRule:
    """
    Stop once max |f - phi| <= `target` and max |f - phi| / |f| <= `relative_bound`.

    With relative_bound < 1 the preconditioned spectrum R(lambda) / f(lambda)
    lies in [1 - relative_bound, 1 + relative_bound] for every eigenvalue in `on`.
    """
    if not 0.0 < relative_bound < 1.0:
        raise DomainError(f"relative bound must lie in (0, 1), got {relative_bound}")

    def rule(phi: Approximant) -> bool:
        absolute = sup_norm(lambda z: np.asarray(f(z), dtype=float) - phi(z), on, grid).value
        if absolute > target:
            return False
        relative = sup_norm(
            lambda z: (np.asarray(f(z), dtype=float) - phi(z)) / np.asarray(f(z), dtype=float),
            on,
            grid,
        ).value
        return relative <= relative_bound

    return rule


# -----------------------------------------------------------------------------
# Krylov solves
# -----------------------------------------------------------------------------
class PreconditionerKind(str, Enum):
    """Reference preconditioners."""

    EXACT = "exact"
    IDENTITY = "identity"


class KrylovMethod(str, Enum):
    CG = "cg"
    GMRES = "gmres"


class SolveResult(FrozenModel):
    iterations: int
    residual_history: Tuple[float, ...]
    converged: bool
    method: KrylovMethod


def run_preconditioned_solve(
    op: SurrogateOperator,
    approximant: Union[PartialFraction, PreconditionerKind],
    rhs: Any,
    tol: float = 1e-8,
    max_it: int = 500,
) -> SolveResult:
    """
    Solve S x = rhs to relative residual `tol` with preconditioner M.

    M is R(A) for a partial fraction, S^{-1} for EXACT and nothing for
    IDENTITY. CG is used when M is SPD by construction (c0 >= 0 and all
    residues positive, or a reference preconditioner); otherwise GMRES
    with restart = max_it.
    """
    b = np.asarray(rhs, dtype=float)
    s_op = op.as_linear_operator()
    preconditioner: Optional[LinearOperator]
    if isinstance(approximant, PartialFraction):
        preconditioner = ShiftedSolver(op.a, approximant).as_linear_operator()
        method = KrylovMethod.CG if approximant.is_positive else KrylovMethod.GMRES
    elif PreconditionerKind(approximant) is PreconditionerKind.EXACT:
        preconditioner = LinearOperator((op.n, op.n), matvec=op.apply_inverse, dtype=float)
        method = KrylovMethod.CG
    else:
        preconditioner = None
        method = KrylovMethod.CG

    history: List[float] = []
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return SolveResult(iterations=0, residual_history=(), converged=True, method=method)

    if method is KrylovMethod.CG:

        def on_iterate(xk: FloatArray) -> None:
            history.append(float(np.linalg.norm(b - op.apply(xk))) / b_norm)

        _, info = cg(s_op, b, rtol=tol, atol=0.0, maxiter=max_it, M=preconditioner, callback=on_iterate)
    else:
        logger.warning("Preconditioner is not SPD by construction; using GMRES")

        def on_residual(norm: float) -> None:
            history.append(float(norm))

        _, info = gmres(
            s_op,
            b,
            rtol=tol,
            atol=0.0,
            restart=max_it,
            maxiter=1,
            M=preconditioner,
            callback=on_residual,
            callback_type="pr_norm",
        )

    converged = info == 0
    if not converged:
        logger.warning("%s stopped after %d iterations without reaching %.1e", method.value, len(history), tol)
    return SolveResult(
        iterations=len(history),
        residual_history=tuple(history),
        converged=converged,
        method=method,
    )


# -----------------------------------------------------------------------------
# Sweep
# -----------------------------------------------------------------------------
class PrecondSettings(FrozenModel):
    """Parameter grid and greedy settings for the preconditioner sweep."""

    mu: Tuple[float, ...] = (1.0, 1e-2, 1e-4)
    K: Tuple[float, ...] = (1.0, 1e-2, 1e-4)
    n: Tuple[int, ...] = (16, 32, 64)
    algorithm: Algorithm = Algorithm.IMPROVED_OGA
    target_error: float = Field(0.1, gt=0.0)
    relative_bound: float = Field(0.3, gt=0.0, lt=1.0)
    max_terms: int = Field(20, ge=1)
    tol: float = Field(1e-8, gt=0.0)
    max_it: int = Field(500, ge=1)
    window: PoleWindow = Field(default_factory=PoleWindow)

    @field_validator("mu", "K", "n")
    @classmethod
    def _non_empty_positive(cls, value: Tuple[Any, ...]) -> Tuple[Any, ...]:
        if not value:
            raise ValueError("sweep lists must be non-empty")
        if any(v <= 0 for v in value):
            raise ValueError("sweep values must be positive")
        return value

    @field_validator("algorithm")
    @classmethod
    def _sweep_algorithm(cls, value: Algorithm) -> Algorithm:
        if value is Algorithm.OGA:
            raise ValueError("the sweep runs improved_oga or wcga")
        return value

    def cells(self) -> List[Tuple[float, float, int]]:
        return [(mu, K, n) for mu in self.mu for K in self.K for n in self.n]


class SweepRow(FrozenModel):
    """One (mu, K, n) cell of the sweep; `error` is set when the cell failed."""

    mu: float
    K: float
    n: int
    algorithm: str
    n_poles: Optional[int] = None
    iterations: Optional[int] = None
    exact_iterations: Optional[int] = None
    delta_vs_exact: Optional[int] = None
    uniform_error: Optional[float] = None
    relative_error: Optional[float] = None
    krylov_method: Optional[str] = None
    converged: Optional[bool] = None
    poles_negative: Optional[bool] = None
    error: Optional[str] = None


def build_preconditioner(
    op: SurrogateOperator,
    settings: PrecondSettings,
    pso: PsoConfig = PsoConfig(),
    grid: GridSpec = GridSpec(),
) -> Tuple[PartialFraction, RescaledInterface, Interval]:
    """Greedy approximant of the rescaled inverse symbol, as a partial fraction in A."""
    scale = RescaleParams.for_operator(op)
    target, _ = rescale_target(op.mu, op.K, scale.c)
    fit = Interval(lo=op.a.lambda_min / scale.c, hi=1.0)
    stop = spectral_safety_rule(target, fit, settings.target_error, grid, settings.relative_bound)

    if settings.algorithm is Algorithm.WCGA:
        trace = run_wcga(
            target,
            PlainPoleDictionary(window=settings.window),
            fit,
            WcgaConfig(max_terms=settings.max_terms),
            grid=grid,
            stop_rule=stop,
        )
    else:
        trace = run_improved_oga(
            target,
            NormalizedPoleDictionary(window=settings.window),
            fit,
            settings.max_terms,
            pso,
            ImprovedMode.EVERY_STEP,
            grid=grid,
            stop_rule=stop,
        )
    pf = to_partial_fraction(trace.final).rescaled(scale.c, target.output_scale)
    return pf, target, fit


def run_cell(
    mu: float,
    K: float,
    n: int,
    settings: PrecondSettings,
    pso: PsoConfig = PsoConfig(),
    grid: GridSpec = GridSpec(),
    seed: int = 0,
) -> SweepRow:
    """Build, precondition and solve one cell; failures are recorded on the row."""
    base = {"mu": mu, "K": K, "n": n, "algorithm": settings.algorithm.value}
    try:
        op = SurrogateOperator(n, mu, K)
        pf, target, fit = build_preconditioner(op, settings, pso, grid)
        rhs = np.random.default_rng(seed).standard_normal(n)
        exact = run_preconditioned_solve(op, PreconditionerKind.EXACT, rhs, settings.tol, settings.max_it)
        rational = run_preconditioned_solve(op, pf, rhs, settings.tol, settings.max_it)

        c = op.a.lambda_max
        scaled = pf.rescaled(1.0 / c, 1.0 / target.output_scale)

        def residual(z: FloatArray) -> FloatArray:
            return target(z) - scaled(z)

        absolute = sup_norm(residual, fit, grid).value
        relative = sup_norm(lambda z: residual(z) / target(z), fit, grid).value
    except (RatGreedyError, ValidationError, ArithmeticError, ValueError, LinAlgError) as exc:
        logger.warning("Sweep cell mu=%g K=%g n=%d failed: %s", mu, K, n, exc)
        return SweepRow(**base, error=f"{type(exc).__name__}: {exc}")

    row = SweepRow(
        **base,
        n_poles=pf.n_poles,
        iterations=rational.iterations,
        exact_iterations=exact.iterations,
        delta_vs_exact=rational.iterations - exact.iterations,
        uniform_error=absolute,
        relative_error=relative,
        krylov_method=rational.method.value,
        converged=rational.converged,
        poles_negative=all(p < 0.0 for p in pf.poles),
    )
    logger.info(
        "Sweep cell mu=%g K=%g n=%d: %d poles, %d iterations (exact %d)",
        mu,
        K,
        n,
        row.n_poles,
        row.iterations,
        row.exact_iterations,
    )
    return row


async def sweep_async(
    settings: PrecondSettings,
    pso: PsoConfig = PsoConfig(),
    grid: GridSpec = GridSpec(),
    seed: int = 0,
    max_concurrent: Optional[int] = None,
) -> List[SweepRow]:
    """Run every cell in worker threads, at most `max_concurrent` at once, rows in input order."""
    semaphore = asyncio.Semaphore(max_concurrent or get_settings().MAX_CONCURRENT_JOBS)

    async def guarded(cell: Tuple[float, float, int]) -> SweepRow:
        async with semaphore:
            return await asyncio.to_thread(run_cell, *cell, settings, pso, grid, seed)

    return list(await asyncio.gather(*(guarded(cell) for cell in settings.cells())))


def sweep(
    settings: PrecondSettings,
    pso: PsoConfig = PsoConfig(),
    grid: GridSpec = GridSpec(),
    seed: int = 0,
    max_concurrent: Optional[int] = None,
) -> List[SweepRow]:
    """Synchronous wrapper around `sweep_async`."""
    return asyncio.run(sweep_async(settings, pso, grid, seed, max_concurrent))


def sweep_summary(rows: Sequence[SweepRow]) -> dict:
    """Median and max iteration counts and the pole-count range over successful cells."""
    ok = [r for r in rows if r.error is None]
    if not ok:
        return {"cells": len(rows), "failed": len(rows)}
    iterations = [r.iterations for r in ok]
    poles = [r.n_poles for r in ok]
    return {
        "cells": len(rows),
        "failed": len(rows) - len(ok),
        "median_iterations": statistics.median(iterations),
        "max_iterations": max(iterations),
        "min_poles": min(poles),
        "max_poles": max(poles),
        "max_abs_delta": max(abs(r.delta_vs_exact) for r in ok),
    }
