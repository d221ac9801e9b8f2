# tests/unit/test_errors.py
"""
Contract tests for the exception hierarchy and the unified error envelope:

    {
        "error": str,     # exception name or generic phrase
        "code": int,      # process exit code (1 usage/config, 2 numerical)
        "details": Optional[str | list | dict]
    }
"""
from __future__ import annotations

import pytest
from pydantic import ValidationError

from ratgreedy.domain import Interval
from ratgreedy.errors import (
    EXIT_NUMERICAL,
    EXIT_USAGE,
    ConfigError,
    DomainError,
    DuplicateParameterError,
    EigenSolverError,
    FactorizationError,
    PoleEvaluationError,
    QuadratureError,
    RatGreedyError,
    ResidualConverged,
    SingularGramError,
    UnsupportedConversionError,
    error_envelope,
    first_error_key,
    flatten_validation_errors,
)

pytestmark = [pytest.mark.unit, pytest.mark.error]


@pytest.mark.parametrize(
    "exc, code",
    [
        (DomainError("x"), EXIT_USAGE),
        (ConfigError("x", key="n"), EXIT_USAGE),
        (PoleEvaluationError("x"), EXIT_NUMERICAL),
        (QuadratureError("x", last_estimate=1.0, error_estimate=0.1), EXIT_NUMERICAL),
        (SingularGramError("x"), EXIT_NUMERICAL),
        (DuplicateParameterError("x"), EXIT_NUMERICAL),
        (UnsupportedConversionError("x"), EXIT_NUMERICAL),
        (FactorizationError("x"), EXIT_NUMERICAL),
        (EigenSolverError("x"), EXIT_NUMERICAL),
    ],
)
def test_exit_codes(exc: RatGreedyError, code: int) -> None:
    assert isinstance(exc, RatGreedyError)
    assert exc.exit_code == code


def test_domain_errors_are_value_errors() -> None:
    assert issubclass(DomainError, ValueError)
    assert issubclass(PoleEvaluationError, DomainError)
    assert issubclass(DuplicateParameterError, SingularGramError)


def test_error_payloads() -> None:
    exc = QuadratureError("stalled", last_estimate=0.5, error_estimate=1e-3)
    assert (exc.last_estimate, exc.error_estimate) == (0.5, 1e-3)
    assert ResidualConverged(1e-17).norm == 1e-17
    cfg = ConfigError("bad", key="fit_interval.lo", details=["fit_interval.lo: too small"])
    assert cfg.key == "fit_interval.lo" and cfg.details == ["fit_interval.lo: too small"]


def test_envelope_shape() -> None:
    assert error_envelope(EXIT_USAGE, "missing target") == {
        "error": "Usage Error",
        "code": 1,
        "details": "missing target",
    }
    envelope = error_envelope(EXIT_NUMERICAL, ["a", "b"], error="QuadratureError")
    assert set(envelope) == {"error", "code", "details"}
    assert envelope["error"] == "QuadratureError" and envelope["code"] == 2
    assert error_envelope(7)["error"] == "Error"


def test_validation_error_helpers() -> None:
    with pytest.raises(ValidationError) as excinfo:
        Interval(lo=-1.0, hi=1.0)
    assert first_error_key(excinfo.value) == "lo"
    items = flatten_validation_errors(excinfo.value)
    assert items and items[0].startswith("lo: ")
