"""
Exception hierarchy and error envelope for ratgreedy.

Hard failures raise a subclass of `RatGreedyError`. Soft failures (minimax
non-convergence, spectral truncation, degenerate windows, Krylov iteration
caps) are reported as flags on the returned objects instead.

The CLI turns exceptions into an exit code plus a JSON envelope:
    {"error": <phrase>, "code": <int>, "details": <str|list|None>}
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from pydantic import ValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

_PHRASES = {
    EXIT_OK: "OK",
    EXIT_USAGE: "Usage Error",
    EXIT_NUMERICAL: "Numerical Failure",
}


class RatGreedyError(Exception):
    """Base class for all library errors."""

    exit_code: int = EXIT_NUMERICAL


class DomainError(RatGreedyError, ValueError):
    """A parameter or point lies outside the set where it is defined."""

    exit_code = EXIT_USAGE


class PoleEvaluationError(DomainError):
    """A pole-kind element was evaluated exactly at its pole."""

    exit_code = EXIT_NUMERICAL


class QuadratureError(RatGreedyError):
    """Adaptive quadrature hit its panel cap before reaching tolerance."""

    def __init__(self, message: str, *, last_estimate: float, error_estimate: float):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.error_estimate = error_estimate


class SingularGramError(RatGreedyError):
    """Gram matrix requested for a basis with repeated parameters."""


class DuplicateParameterError(SingularGramError):
    """A greedy step selected an already used parameter, even after perturbation."""


class ResidualConverged(RatGreedyError):
    """Signal: the residual sup-norm is below the convergence floor."""

    def __init__(self, norm: float):
        super().__init__(f"residual sup-norm {norm:.3e} below convergence floor")
        self.norm = norm


class UnsupportedConversionError(RatGreedyError):
    """Approximant cannot be written in partial-fraction form."""


class FactorizationError(RatGreedyError):
    """Cholesky factorization of a shifted operator failed (input not SPD)."""


class EigenSolverError(RatGreedyError):
    """Symmetric eigendecomposition failed."""


class ConfigError(RatGreedyError):
    """Experiment configuration rejected; `key` names the offending entry."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, *, key: Optional[str] = None, details: Any = None):
        super().__init__(message)
        self.key = key
        self.details = details


# -----------------------------------------------------------------------------
# Envelope helpers
# -----------------------------------------------------------------------------
def error_envelope(
    code: int, details: Any = None, *, error: Optional[str] = None
) -> Dict[str, Any]:
    """Unified error shape used on stderr by the CLI."""
    return {
        "error": error or _PHRASES.get(code, "Error"),
        "code": int(code),
        "details": details,
    }


def flatten_validation_errors(exc: ValidationError) -> List[str]:
    # Compact "a.b.c: message" strings, one per pydantic error.
    items: List[str] = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ()))
        msg = err.get("msg", "Invalid value")
        items.append(f"{loc}: {msg}" if loc else msg)
    return items or [str(exc)]


def first_error_key(exc: ValidationError) -> Optional[str]:
    """Dotted location of the first validation error, if any."""
    for err in exc.errors():
        loc = err.get("loc", ())
        if loc:
            return ".".join(str(p) for p in loc)
    return None
