# tests/unit/test_analysis.py
"""
Quadrature, Gram systems, projection and the uniform norm, checked against
closed forms and dense-grid oracles.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from ratgreedy.analysis import (
    CompositeRule,
    GridSpec,
    QuadratureRule,
    check_distinct,
    element_inner,
    gram_and_moments,
    inner_product,
    l2_error,
    log_grid,
    norming_functional_apply,
    norming_point,
    project,
    solve_gram,
    sup_norm,
    uniform_error,
)
from ratgreedy.domain import Approximant, Element, ElementKind, Interval, InversePower
from ratgreedy.errors import DomainError, QuadratureError, ResidualConverged, SingularGramError

pytestmark = pytest.mark.unit

UNIT = Interval(lo=0.0, hi=1.0)
FIT = Interval(lo=1e-8, hi=1.0)


def pole(p: float, scale: float = 1.0) -> Element:
    return Element(kind=ElementKind.PLAIN_POLE, param=p, scale=scale)


def power(eta: float) -> Element:
    return Element(kind=ElementKind.NEGATIVE_POWER, param=eta)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------
def test_inner_product_of_two_poles() -> None:
    value = inner_product(lambda z: 1.0 / (z + 1.0), lambda z: 1.0 / (z + 2.0), UNIT)
    assert value == pytest.approx(math.log(4.0 / 3.0), rel=1e-10)


def test_quadrature_resolves_endpoint_singularity() -> None:
    result = QuadratureRule().integrate(lambda z: z**-0.5, FIT)
    assert result.converged
    assert result.value == pytest.approx(2.0 * (1.0 - 1e-4), rel=1e-10)


def test_quadrature_panel_cap_reports_not_converged() -> None:
    rule = QuadratureRule(max_panels=1)
    result = rule.integrate(lambda z: np.sin(200.0 * z), UNIT)
    assert not result.converged
    with pytest.raises(QuadratureError) as excinfo:
        inner_product(lambda z: np.sin(200.0 * z), lambda z: np.ones_like(z), UNIT, rule)
    assert math.isfinite(excinfo.value.last_estimate)
    assert excinfo.value.error_estimate > 0.0


def test_quadrature_rejects_non_finite_integrand() -> None:
    with pytest.raises(QuadratureError):
        QuadratureRule().integrate(lambda z: np.where(z > 0.5, np.nan, 1.0), UNIT)


def test_composite_rule_integrates_smooth_and_singular() -> None:
    nodes, weights = CompositeRule().nodes_weights(FIT)
    assert weights.sum() == pytest.approx(FIT.width, rel=1e-13)
    assert float(weights @ nodes**-0.5) == pytest.approx(2.0 * (1.0 - 1e-4), rel=1e-10)
    assert not nodes.flags.writeable


# ---------------------------------------------------------------------------
# Gram systems and projection
# ---------------------------------------------------------------------------
def test_pole_gram_entries_match_quadrature() -> None:
    g, h = pole(-1.0), pole(-2.0)
    for u, v in [(g, g), (g, h), (h, h)]:
        assert element_inner(u, v, UNIT) == pytest.approx(inner_product(u, v, UNIT), rel=1e-10)


@pytest.mark.property
def test_random_pole_pairs_closed_form_matches_quadrature() -> None:
    rng = np.random.default_rng(7)
    exponents = rng.uniform(-6.0, 2.0, size=(50, 2))
    for a, b in exponents:
        g, h = pole(-(10.0**a)), pole(-(10.0**b))
        closed = element_inner(g, h, FIT)
        assert closed == pytest.approx(inner_product(g, h, FIT), rel=1e-10)


def test_power_gram_entries_match_quadrature() -> None:
    on = Interval(lo=1e-6, hi=1.0)
    for eta, theta in [(0.2, 0.3), (0.5, 0.5), (0.1, 0.85)]:
        g, h = power(eta), power(theta)
        assert element_inner(g, h, on) == pytest.approx(inner_product(g, h, on), rel=1e-10)


def test_mixed_pair_uses_quadrature() -> None:
    on = Interval(lo=1e-6, hi=1.0)
    g, h = pole(-0.5), power(0.3)
    assert element_inner(g, h, on) == pytest.approx(inner_product(g, h, on), rel=1e-12)


def test_repeated_parameters_are_singular() -> None:
    with pytest.raises(SingularGramError):
        check_distinct([pole(-1.0), pole(-2.0), pole(-1.0)])
    with pytest.raises(SingularGramError):
        gram_and_moments([pole(-1.0), pole(-1.0)], lambda z: z, UNIT)
    with pytest.raises(DomainError):
        gram_and_moments([], lambda z: z, UNIT)


def test_projection_residual_is_orthogonal() -> None:
    f = InversePower(alpha=0.5)
    basis = (pole(-1e-3), pole(-0.1), pole(-10.0))
    projection = project(f, basis, FIT)
    assert not projection.truncated
    phi = Approximant(basis=basis, coeffs=tuple(projection.coeffs))
    f_norm = math.sqrt(math.log(1e8))
    for g in basis:
        g_norm = math.sqrt(element_inner(g, g, FIT))
        residual_inner = inner_product(lambda z: f(z) - phi(z), g, FIT)
        assert abs(residual_inner) <= 1e-8 * f_norm * g_norm


def test_projection_error_is_nested() -> None:
    f = InversePower(alpha=0.5)
    basis = (pole(-1.2e-4), pole(-3e-2), pole(-2.0))
    errors = []
    for k in (1, 2, 3):
        coeffs = project(f, basis[:k], FIT).coeffs
        errors.append(l2_error(f, Approximant(basis=basis[:k], coeffs=tuple(coeffs)), FIT))
    assert errors[0] >= errors[1] >= errors[2]


def test_solve_gram_truncates_singular_systems() -> None:
    projection = solve_gram(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 1.0]))
    assert projection.truncated
    np.testing.assert_allclose(projection.coeffs, [0.5, 0.5])


def test_l2_error_of_exact_representation() -> None:
    phi = Approximant(basis=(pole(-1.0),), coeffs=(2.0,))
    assert l2_error(lambda z: 2.0 / (z + 1.0), phi, UNIT) < 1e-12
    # ||1/(z+1)||^2 on [0, 1] is 1/2
    assert l2_error(lambda z: 3.0 / (z + 1.0), phi, UNIT) == pytest.approx(math.sqrt(0.5), rel=1e-10)


# ---------------------------------------------------------------------------
# Uniform norm
# ---------------------------------------------------------------------------
def test_log_grid_covers_endpoints() -> None:
    z = log_grid(Interval(lo=1e-6, hi=1.0), 100)
    assert z.size == 100 and z[0] == 1e-6 and z[-1] == 1.0
    assert np.all(np.diff(z) > 0.0)
    z0 = log_grid(UNIT, 50)
    assert z0[0] == 0.0 and z0[-1] == 1.0 and z0.size == 50


def test_sup_norm_ties_resolve_to_the_right() -> None:
    norm = sup_norm(lambda z: z - 0.5, UNIT)
    assert norm.argmax == 1.0
    assert norm.value == pytest.approx(0.5)
    assert norm.sign == 1.0
    assert norming_functional_apply(lambda z: z - 0.5, lambda z: 1.0 / (z + 1.0), UNIT) == pytest.approx(0.5)


def test_sup_norm_refines_between_grid_points() -> None:
    on = Interval(lo=0.1, hi=1.0)
    norm = sup_norm(lambda z: 1.0 - (z - 0.3) ** 2, on, GridSpec(n_points=37))
    assert norm.value == pytest.approx(1.0, abs=1e-10)
    assert norm.argmax == pytest.approx(0.3, abs=1e-5)


def test_norming_functional_attains_the_norm() -> None:
    def residual(z):
        return np.sin(7.0 * z) - 0.3

    norm = sup_norm(residual, UNIT)
    assert abs(norming_functional_apply(residual, residual, UNIT) - norm.value) < 1e-12


def test_norming_point_signals_convergence() -> None:
    with pytest.raises(ResidualConverged) as excinfo:
        norming_point(lambda z: np.zeros_like(z), UNIT)
    assert excinfo.value.norm == 0.0


def test_sup_norm_rejects_non_finite_residual() -> None:
    with pytest.raises(DomainError):
        sup_norm(lambda z: 1.0 / z, UNIT)


@pytest.mark.property
@pytest.mark.parametrize(
    "residual, on",
    [
        (lambda z: np.sin(40.0 * z) + 0.5 * z, UNIT),
        (lambda z: np.cos(25.0 * np.log(z)) * z**0.1, Interval(lo=1e-6, hi=1.0)),
        (lambda z: np.exp(-(((np.log10(z) + 3.3) / 0.05) ** 2)), Interval(lo=1e-6, hi=1.0)),
    ],
)
def test_uniform_error_never_loses_the_dense_grid_maximum(residual, on: Interval) -> None:
    dense = np.union1d(np.linspace(on.lo, on.hi, 50_000), np.geomspace(max(on.lo, 1e-12), on.hi, 50_000))
    dense_max = float(np.max(np.abs(residual(dense))))
    err = uniform_error(residual, lambda z: np.zeros_like(z), on)
    assert err.value >= dense_max - 1e-9


def test_uniform_error_of_inverse_square_root() -> None:
    err = uniform_error(InversePower(alpha=0.5), lambda z: np.zeros_like(z), Interval(lo=1e-6, hi=1.0))
    assert err.value == pytest.approx(1e3)
    assert err.argmax == pytest.approx(1e-6)
