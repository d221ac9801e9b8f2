"""
L2 inner products, Gram systems, projection and uniform-norm evaluation.

Quadrature is adaptive composite Gauss-Legendre on log-spaced panels, so
targets that blow up near the left end of [1e-8, 1] are still resolved.
Uniform norms are taken on a logarithmic grid and the largest local maxima
are refined with a bounded scalar search.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
from typing import Any, Callable, List, NamedTuple, Sequence, Tuple

import numpy as np
from pydantic import Field
from scipy.optimize import minimize_scalar

from ratgreedy.domain import (
    Approximant,
    Element,
    FloatArray,
    FrozenModel,
    Interval,
    pole_pair_integral,
    power_integral,
)
from ratgreedy.errors import DomainError, QuadratureError, ResidualConverged, SingularGramError

logger = logging.getLogger(__name__)

Evaluator = Callable[[FloatArray], Any]

CONVERGENCE_FLOOR = 1e-15
SPECTRAL_CUTOFF = 1e-12
# Left end of the first panel when the interval starts at 0.
_ZERO_PANEL_FRACTION = 1e-12

_GAUSS_LOW = np.polynomial.legendre.leggauss(10)
_GAUSS_HIGH = np.polynomial.legendre.leggauss(20)


# -----------------------------------------------------------------------------
# Quadrature
# -----------------------------------------------------------------------------
def _breakpoints(on: Interval, per_decade: int) -> FloatArray:
    """Log-spaced panel edges; [0, hi * 1e-12] is the first panel when lo == 0."""
    lo, hi = on.lo, on.hi
    if lo > 0.0:
        n_panels = max(1, math.ceil(math.log10(hi / lo) * per_decade))
        edges = np.geomspace(lo, hi, n_panels + 1)
    else:
        floor = hi * _ZERO_PANEL_FRACTION
        n_panels = max(1, math.ceil(-math.log10(_ZERO_PANEL_FRACTION) * per_decade))
        edges = np.concatenate(([0.0], np.geomspace(floor, hi, n_panels + 1)))
    edges[0], edges[-1] = lo, hi
    return edges


def _gauss_on_panels(
    fn: Evaluator, a: FloatArray, b: FloatArray, rule: Tuple[FloatArray, FloatArray]
) -> FloatArray:
    x, w = rule
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    values = np.asarray(fn(nodes.ravel()), dtype=float).reshape(nodes.shape)
    if not np.all(np.isfinite(values)):
        raise QuadratureError(
            "integrand is not finite at a quadrature node",
            last_estimate=math.nan,
            error_estimate=math.inf,
        )
    return half * (values @ w)


class QuadratureResult(NamedTuple):
    value: float
    error: float
    panels: int
    converged: bool


class QuadratureRule(FrozenModel):
    """Adaptive composite Gauss-Legendre (10 vs 20 nodes per panel)."""

    rel_tol: float = Field(1e-11, gt=0.0)
    abs_tol: float = Field(1e-15, ge=0.0)
    max_panels: int = Field(4096, ge=1)
    panels_per_decade: int = Field(2, ge=1)

    def integrate(self, fn: Evaluator, on: Interval) -> QuadratureResult:
        """Integrate `fn` over `on`; `converged` is False when max_panels stopped it."""
        edges = _breakpoints(on, self.panels_per_decade)
        a, b = edges[:-1], edges[1:]
        values = _gauss_on_panels(fn, a, b, _GAUSS_HIGH)
        errors = np.abs(values - _gauss_on_panels(fn, a, b, _GAUSS_LOW))

        while True:
            total = float(values.sum())
            err = float(errors.sum())
            if err <= max(self.rel_tol * abs(total), self.abs_tol):
                return QuadratureResult(total, err, a.size, True)
            room = self.max_panels - a.size
            if room <= 0:
                return QuadratureResult(total, err, a.size, False)

            threshold = self.rel_tol * abs(total) / a.size
            split = np.flatnonzero(errors > threshold)
            if split.size == 0:
                split = np.array([int(np.argmax(errors))])
            split = split[np.argsort(-errors[split], kind="stable")][:room]

            sa, sb = a[split], b[split]
            mid = np.where(sa > 0.0, np.sqrt(sa * sb), 0.5 * (sa + sb))
            new_a = np.concatenate((sa, mid))
            new_b = np.concatenate((mid, sb))
            new_values = _gauss_on_panels(fn, new_a, new_b, _GAUSS_HIGH)
            new_errors = np.abs(new_values - _gauss_on_panels(fn, new_a, new_b, _GAUSS_LOW))

            keep = np.ones(a.size, dtype=bool)
            keep[split] = False
            a = np.concatenate((a[keep], new_a))
            b = np.concatenate((b[keep], new_b))
            values = np.concatenate((values[keep], new_values))
            errors = np.concatenate((errors[keep], new_errors))


@lru_cache(maxsize=64)
def _composite_nodes(lo: float, hi: float, per_decade: int, order: int) -> Tuple[FloatArray, FloatArray]:
    edges = _breakpoints(Interval(lo=lo, hi=hi), per_decade)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


class CompositeRule(FrozenModel):
    """Fixed nodes and weights for vectorized integrals over many integrands."""

    panels_per_decade: int = Field(8, ge=1)
    order: int = Field(20, ge=2)

    def nodes_weights(self, on: Interval) -> Tuple[FloatArray, FloatArray]:
        return _composite_nodes(on.lo, on.hi, self.panels_per_decade, self.order)


def inner_product(
    u: Evaluator, v: Evaluator, on: Interval, rule: QuadratureRule = QuadratureRule()
) -> float:
    """∫ u v dz over `on` to the rule tolerance."""
    result = rule.integrate(
        lambda z: np.asarray(u(z), dtype=float) * np.asarray(v(z), dtype=float), on
    )
    if not result.converged:
        raise QuadratureError(
            f"quadrature did not converge within {rule.max_panels} panels",
            last_estimate=result.value,
            error_estimate=result.error,
        )
    return result.value


# -----------------------------------------------------------------------------
# Gram systems and projection
# -----------------------------------------------------------------------------
def element_inner(
    g: Element, h: Element, on: Interval, rule: QuadratureRule = QuadratureRule()
) -> float:
    """(g, h) in L2(on): closed form for pole/pole and power/power pairs."""
    if g.is_pole and h.is_pole:
        return float(g.scale * h.scale * pole_pair_integral(g.param, h.param, on.lo, on.hi))
    if g.is_power and h.is_power:
        return float(g.scale * h.scale * power_integral(g.param + h.param, on.lo, on.hi))
    return inner_product(g, h, on, rule)


def check_distinct(basis: Sequence[Element]) -> None:
    for i, g in enumerate(basis):
        for h in basis[:i]:
            if g.same_parameter(h):
                raise SingularGramError(f"basis repeats parameter {g.param}")


def gram_and_moments(
    basis: Sequence[Element],
    f: Evaluator,
    on: Interval,
    rule: QuadratureRule = QuadratureRule(),
) -> Tuple[FloatArray, FloatArray]:
    """Gram matrix G[i, j] = (g_i, g_j) and moments m[i] = (f, g_i)."""
    if not basis:
        raise DomainError("basis must be non-empty")
    check_distinct(basis)
    k = len(basis)
    gram = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            gram[i, j] = gram[j, i] = element_inner(basis[i], basis[j], on, rule)
    moments = np.array([inner_product(f, g, on, rule) for g in basis])
    return gram, moments


class Projection(NamedTuple):
    coeffs: FloatArray
    truncated: bool


def solve_gram(gram: FloatArray, moments: FloatArray, cutoff: float = SPECTRAL_CUTOFF) -> Projection:
    """Least-squares solve of G c = m by spectral decomposition with a relative cutoff."""
    eigvals, eigvecs = np.linalg.eigh(gram)
    keep = eigvals > cutoff * max(float(eigvals[-1]), 0.0)
    truncated = not bool(np.all(keep))
    if truncated:
        logger.warning(
            "Gram matrix numerically singular; dropped %d of %d eigenvalues",
            int((~keep).sum()),
            keep.size,
        )
    v = eigvecs[:, keep]
    coeffs = v @ ((v.T @ moments) / eigvals[keep])
    return Projection(coeffs, truncated)


def project(
    f: Evaluator,
    basis: Sequence[Element],
    on: Interval,
    rule: QuadratureRule = QuadratureRule(),
) -> Projection:
    """Orthogonal L2 projection coefficients of f onto span(basis)."""
    gram, moments = gram_and_moments(basis, f, on, rule)
    return solve_gram(gram, moments)


def l2_error(
    f: Evaluator, phi: Approximant, on: Interval, rule: QuadratureRule = QuadratureRule()
) -> float:
    """||f - phi|| in L2(on)."""
    result = rule.integrate(lambda z: (np.asarray(f(z), dtype=float) - phi(z)) ** 2, on)
    if not result.converged:
        logger.warning(
            "L2 error quadrature stopped at %d panels (estimate %.3e, error %.1e)",
            result.panels,
            result.value,
            result.error,
        )
    return math.sqrt(max(result.value, 0.0))


# -----------------------------------------------------------------------------
# Uniform norm
# -----------------------------------------------------------------------------
class GridSpec(FrozenModel):
    """Logarithmic evaluation grid plus peak refinement settings."""

    n_points: int = Field(2000, ge=2)
    refine_iters: int = Field(40, ge=0)
    n_peaks: int = Field(8, ge=1)


def log_grid(on: Interval, n_points: int) -> FloatArray:
    """n_points log-spaced points including both endpoints (and 0 when lo == 0)."""
    if on.lo > 0.0:
        z = np.geomspace(on.lo, on.hi, n_points)
    else:
        z = np.concatenate(([0.0], np.geomspace(on.hi * _ZERO_PANEL_FRACTION, on.hi, n_points - 1)))
    z[0], z[-1] = on.lo, on.hi
    return z


class SupNorm(NamedTuple):
    value: float
    argmax: float
    sign: float
    peaks: Tuple[float, ...]


class UniformError(NamedTuple):
    value: float
    argmax: float


def _refine_peak(
    residual: Evaluator, lo: float, hi: float, iters: int
) -> Tuple[float, float]:
    if lo > 0.0:
        x_lo, x_hi = math.log(lo), math.log(hi)

        def to_z(x: float) -> float:
            return min(max(math.exp(x), lo), hi)

    else:
        x_lo, x_hi = lo, hi

        def to_z(x: float) -> float:
            return min(max(x, lo), hi)

    def objective(x: float) -> float:
        return -abs(float(np.asarray(residual(np.array([to_z(x)])), dtype=float)[0]))

    res = minimize_scalar(
        objective,
        bounds=(x_lo, x_hi),
        method="bounded",
        options={"maxiter": iters, "xatol": 1e-10 * (x_hi - x_lo)},
    )
    return to_z(float(res.x)), -float(res.fun)


def sup_norm(residual: Evaluator, on: Interval, grid: GridSpec = GridSpec()) -> SupNorm:
    """
    max |residual| over `on`, its maximizer, the residual sign there, and the
    refined local peaks. Ties on the grid resolve to the rightmost point.
    """
    z = log_grid(on, grid.n_points)
    r = np.asarray(residual(z), dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("residual is not finite on the evaluation grid")
    mag = np.abs(r)

    last = mag.size - 1
    best_i = last - int(np.argmax(mag[::-1]))
    best_z, best_v = float(z[best_i]), float(mag[best_i])

    left = np.concatenate(([-np.inf], mag[:-1]))
    right = np.concatenate((mag[1:], [-np.inf]))
    candidates = np.flatnonzero((mag >= left) & (mag >= right))
    candidates = candidates[np.argsort(-mag[candidates], kind="stable")][: grid.n_peaks]

    peaks: List[float] = []
    for i in candidates:
        zi, vi = float(z[i]), float(mag[i])
        if grid.refine_iters > 0:
            rz, rv = _refine_peak(residual, float(z[max(i - 1, 0)]), float(z[min(i + 1, last)]), grid.refine_iters)
            if rv > vi:
                zi, vi = rz, rv
        peaks.append(zi)
        if vi > best_v:
            best_z, best_v = zi, vi

    sign = float(np.sign(np.asarray(residual(np.array([best_z])), dtype=float)[0]))
    return SupNorm(best_v, best_z, sign, tuple(peaks))


def uniform_error(
    f: Evaluator, phi: Evaluator, on: Interval, grid: GridSpec = GridSpec()
) -> UniformError:
    """(max |f - phi| over `on`, maximizer)."""
    norm = sup_norm(
        lambda z: np.asarray(f(z), dtype=float) - np.asarray(phi(z), dtype=float), on, grid
    )
    return UniformError(norm.value, norm.argmax)


def norming_point(residual: Evaluator, on: Interval, grid: GridSpec = GridSpec()) -> SupNorm:
    """Sup-norm data for the norming functional; signals convergence near zero."""
    norm = sup_norm(residual, on, grid)
    if norm.value < CONVERGENCE_FLOOR:
        raise ResidualConverged(norm.value)
    return norm


def norming_functional_apply(
    residual: Evaluator, g: Evaluator, on: Interval, grid: GridSpec = GridSpec()
) -> float:
    """<F_r, g> = sign(r(z*)) g(z*) with z* = argmax |r|."""
    norm = norming_point(residual, on, grid)
    value = np.asarray(g(np.array([norm.argmax])), dtype=float)[0]
    return float(norm.sign * value)
