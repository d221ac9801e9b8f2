# tests/unit/test_operators.py
"""Partial fractions applied to SPD matrices, against eigendecomposition oracles."""
from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import sqrtm

from ratgreedy.domain import (
    Approximant,
    Element,
    ElementKind,
    Interval,
    InversePower,
    NormalizedPoleDictionary,
    PartialFraction,
)
from ratgreedy.errors import DomainError, UnsupportedConversionError
from ratgreedy.operators import (
    ShiftedSolver,
    SpdMatrix,
    apply_exact,
    apply_rational,
    check_operator_bound,
    shift_min_eigenvalue,
    to_partial_fraction,
)

pytestmark = pytest.mark.unit


def test_spd_matrix_validation() -> None:
    with pytest.raises(DomainError):
        SpdMatrix(np.ones((2, 3)))
    with pytest.raises(DomainError):
        SpdMatrix([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DomainError):
        SpdMatrix([[1.0, 0.0], [0.0, -1.0]])


def test_spd_matrix_is_read_only(spd_factory) -> None:
    a = spd_factory(5)
    assert a.n == 5
    assert a.lambda_min == pytest.approx(1.0) and a.lambda_max == pytest.approx(1e3)
    with pytest.raises(ValueError):
        a.matrix[0, 0] = 3.0
    assert a.spectrum == Interval(lo=a.lambda_min, hi=a.lambda_max)


def test_spectrum_of_a_scalar_multiple_of_identity() -> None:
    spectrum = SpdMatrix(2.0 * np.eye(3)).spectrum
    assert spectrum.lo == 2.0 and spectrum.hi > 2.0


def test_to_partial_fraction_folds_in_the_scale() -> None:
    fit = Interval(lo=1e-8, hi=1.0)
    spec = NormalizedPoleDictionary(fit=fit)
    phi = Approximant(basis=(spec.element(-1e-3), spec.element(-2.0)), coeffs=(0.7, -0.2), fit=fit)
    pf = to_partial_fraction(phi)
    assert pf.c0 == 0.0 and pf.poles == (-1e-3, -2.0)
    z = np.geomspace(1e-8, 1.0, 30)
    np.testing.assert_allclose(pf(z), phi(z), rtol=1e-13)


def test_power_basis_has_no_partial_fraction() -> None:
    phi = Approximant(basis=(Element(kind=ElementKind.NEGATIVE_POWER, param=0.3),), coeffs=(1.0,))
    with pytest.raises(UnsupportedConversionError):
        to_partial_fraction(phi)


def test_apply_rational_matches_spectral_evaluation(spd_factory, rng) -> None:
    a = spd_factory(50)
    pf = PartialFraction(c0=0.1, residues=(0.5, 2.0, -0.3), poles=(-1e-2, -3.0, -40.0))
    b = rng.standard_normal(50)
    expected = a.spectral_apply(pf(a.eigenvalues), b)
    result = apply_rational(a, b, pf)
    assert np.linalg.norm(result - expected) <= 1e-10 * np.linalg.norm(expected)


@pytest.mark.property
def test_apply_rational_is_linear_in_b(spd_factory, rng) -> None:
    a = spd_factory(40)
    pf = PartialFraction(c0=0.2, residues=(0.5, 2.0, -0.3), poles=(-1e-2, -3.0, -40.0))
    b1, b2 = rng.standard_normal(40), rng.standard_normal(40)
    alpha, beta = 1.7, -0.4
    combined = apply_rational(a, alpha * b1 + beta * b2, pf)
    separate = alpha * apply_rational(a, b1, pf) + beta * apply_rational(a, b2, pf)
    assert np.linalg.norm(combined - separate) <= 1e-12 * np.linalg.norm(separate)


def test_shifted_solver_reuses_factors(spd_factory, rng) -> None:
    a = spd_factory(10)
    pf = PartialFraction(residues=(1.0, 1.0), poles=(-1.0, -5.0))
    solver = ShiftedSolver(a, pf)
    op = solver.as_linear_operator()
    for _ in range(3):
        b = rng.standard_normal(10)
        np.testing.assert_allclose(op.matvec(b), solver.apply(b), rtol=1e-14)
    assert len(solver._factors) == 2


def test_apply_exact_inverse_square_root(spd_factory, rng) -> None:
    a = spd_factory(20, cond=1e2)
    b = rng.standard_normal(20)
    expected = np.linalg.solve(np.real(sqrtm(np.array(a.matrix))), b)
    np.testing.assert_allclose(apply_exact(a, b, InversePower(alpha=0.5)), expected, rtol=1e-8, atol=1e-10)
    with pytest.raises(DomainError):
        apply_exact(a, b, lambda z: np.full_like(z, np.nan))


def test_operator_bound_is_tight_for_exact_rational(spd_factory, rng) -> None:
    a = spd_factory(15)
    pf = PartialFraction(c0=0.2, residues=(1.0, 3.0), poles=(-0.5, -7.0))
    bound = check_operator_bound(a, rng.standard_normal(15), pf, pf)
    assert bound.holds
    assert bound.lhs <= 1e-10 and bound.rhs == 0.0


@pytest.mark.property
def test_operator_bound_holds_on_random_matrices(spd_factory, rng) -> None:
    # The bound holds for any R, accurate or not.
    f = InversePower(alpha=0.5)
    pf = PartialFraction(residues=(0.08, 0.3, 1.2), poles=(-0.02, -0.6, -15.0))
    for _ in range(100):
        a = spd_factory(30, cond=float(rng.uniform(10.0, 1e4)))
        bound = check_operator_bound(a, rng.standard_normal(30), f, pf)
        assert bound.holds, bound


def test_shift_min_eigenvalue(spd_factory) -> None:
    a = spd_factory(8)
    assert shift_min_eigenvalue(a, -2.5) == pytest.approx(a.lambda_min + 2.5, rel=1e-12)
    with pytest.raises(DomainError):
        shift_min_eigenvalue(a, 0.5)
