"""
Core value types for greedy rational approximation.

Public surface:
- Interval / PoleWindow: closed real intervals with their invariants.
- Element: one dictionary member (normalized pole, plain pole, z^(-eta), custom).
- Dictionary families (NormalizedPole, PlainPole, NegativePower) and the
  `DictionarySpec` discriminated union the greedy drivers search.
- Target functions (InversePower, TwoTermFrac, RescaledInterface, Custom).
- Approximant, PartialFraction, IterationRecord, GreedyTrace.

Every evaluator in this package is vectorized: it takes a numpy array of
points and returns an array of the same shape.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Callable, ClassVar, Literal, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Annotated, Self

from ratgreedy.errors import DomainError, PoleEvaluationError

FloatArray = npt.NDArray[np.float64]
Evaluator = Callable[[FloatArray], FloatArray]

DEFAULT_POLE_LEFT = -100.0
DEFAULT_POLE_RIGHT = -1e-9


class FrozenModel(BaseModel):
    """Immutable value type; unknown fields rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)


# -----------------------------------------------------------------------------
# Closed-form integrals
# -----------------------------------------------------------------------------
def pole_pair_integral(p: Any, q: Any, lo: float, hi: float) -> FloatArray:
    """
    ∫_lo^hi dz / ((z - p)(z - q)) for poles p, q < lo (broadcasts over p, q).

    Written with log1p of the pole gap so nearly equal poles do not cancel.
    """
    p_arr, q_arr = np.broadcast_arrays(
        np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    )
    gap = q_arr - p_arr
    limit = (hi - lo) / ((lo - q_arr) * (hi - q_arr))
    with np.errstate(divide="ignore", invalid="ignore"):
        general = (np.log1p(gap / (hi - q_arr)) - np.log1p(gap / (lo - q_arr))) / (-gap)
    return np.where(gap == 0.0, limit, general)


def power_integral(s: Any, lo: float, hi: float) -> FloatArray:
    """∫_lo^hi z^(-s) dz, with the logarithmic limit at s = 1."""
    s_arr = np.asarray(s, dtype=float)
    u = 1.0 - s_arr
    if lo == 0.0:
        if np.any(u <= 0.0):
            raise DomainError("z^(-s) with s >= 1 is not integrable at 0")
        return hi**u / u
    log_ratio = math.log(hi / lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        general = lo**u * np.expm1(u * log_ratio) / u
    return np.where(np.abs(u) < 1e-14, log_ratio, general)


def normalized_pole_scale(p: float, fit: "Interval") -> float:
    """(1/(a-p) - 1/(b-p))^(-1/2): the factor giving the pole unit L2 norm on fit."""
    a, b = fit.lo, fit.hi
    return math.sqrt((a - p) * (b - p) / (b - a))


# -----------------------------------------------------------------------------
# Intervals
# -----------------------------------------------------------------------------
class Interval(FrozenModel):
    """Closed interval [lo, hi] with 0 <= lo < hi."""

    lo: float = Field(..., ge=0.0, description="Left endpoint")
    hi: float = Field(..., description="Right endpoint")

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")
        return self

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, z: float) -> bool:
        return self.lo <= z <= self.hi


class PoleWindow(FrozenModel):
    """Candidate pole set P = [left, right], strictly negative."""

    left: float = DEFAULT_POLE_LEFT
    right: float = DEFAULT_POLE_RIGHT

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not (math.isfinite(self.left) and math.isfinite(self.right)):
            raise ValueError("pole window endpoints must be finite")
        if not self.left < self.right < 0.0:
            raise ValueError(
                f"pole window needs left < right < 0, got [{self.left}, {self.right}]"
            )
        return self

    def contains(self, p: float) -> bool:
        return self.left <= p <= self.right


# -----------------------------------------------------------------------------
# Dictionary elements
# -----------------------------------------------------------------------------
class ElementKind(str, Enum):
    """Kinds of dictionary element."""

    NORMALIZED_POLE = "normalized_pole"
    PLAIN_POLE = "plain_pole"
    NEGATIVE_POWER = "negative_power"
    CUSTOM = "custom"


class Element(FrozenModel):
    """
    One dictionary member g.

    Poles: g(z) = scale / (z - param), param < 0.
    Powers: g(z) = scale * z^(-param), 0 < param < 1.
    Custom: g(z) = scale * evaluator(z); param only identifies the element.
    """

    kind: ElementKind
    param: float
    scale: float = 1.0
    evaluator: Optional[Callable[..., Any]] = Field(default=None, exclude=True, repr=False)

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not (math.isfinite(self.param) and math.isfinite(self.scale)):
            raise ValueError("element parameter and scale must be finite")
        if self.is_pole and self.param >= 0.0:
            raise ValueError(f"poles must be negative, got {self.param}")
        if self.kind is ElementKind.NEGATIVE_POWER and not 0.0 < self.param < 1.0:
            raise ValueError(f"power exponent must lie in (0, 1), got {self.param}")
        if self.kind is ElementKind.CUSTOM and self.evaluator is None:
            raise ValueError("custom elements need an evaluator")
        return self

    @classmethod
    def custom(cls, evaluator: Evaluator, param: float, scale: float = 1.0) -> "Element":
        return cls(kind=ElementKind.CUSTOM, param=param, scale=scale, evaluator=evaluator)

    @property
    def is_pole(self) -> bool:
        return self.kind in (ElementKind.NORMALIZED_POLE, ElementKind.PLAIN_POLE)

    @property
    def is_power(self) -> bool:
        return self.kind is ElementKind.NEGATIVE_POWER

    def same_parameter(self, other: "Element") -> bool:
        return self.kind is other.kind and self.param == other.param

    def __call__(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        if self.is_pole:
            diff = z_arr - self.param
            if np.any(diff == 0.0):
                raise PoleEvaluationError(f"evaluated exactly at the pole {self.param}")
            return self.scale / diff
        if self.is_power:
            with np.errstate(divide="ignore"):
                return self.scale * np.power(z_arr, -self.param)
        values = np.asarray(self.evaluator(z_arr), dtype=float)  # type: ignore[misc]
        return self.scale * np.broadcast_to(values, z_arr.shape).astype(float)

    def l2_norm_sq(self, on: Interval) -> Optional[float]:
        """Closed-form ||g||^2 on `on`; None for custom elements."""
        if self.is_pole:
            return float(self.scale**2 * pole_pair_integral(self.param, self.param, on.lo, on.hi))
        if self.is_power:
            return float(self.scale**2 * power_integral(2.0 * self.param, on.lo, on.hi))
        return None


# -----------------------------------------------------------------------------
# Dictionary families
# -----------------------------------------------------------------------------
class _PoleFamily(FrozenModel):
    # Searched in s = log10(-p) so every decade of the window weighs the same.
    window: PoleWindow = Field(default_factory=PoleWindow)

    is_pole_family: ClassVar[bool] = True

    def contains(self, param: float) -> bool:
        return self.window.contains(param)

    @property
    def param_bounds(self) -> Tuple[float, float]:
        return self.window.left, self.window.right

    def search_bounds(self) -> Tuple[float, float]:
        return math.log10(-self.window.right), math.log10(-self.window.left)

    def to_search(self, param: Any) -> Any:
        return np.log10(-np.asarray(param, dtype=float))

    def from_search(self, s: Any) -> Any:
        return np.clip(-np.power(10.0, s), self.window.left, self.window.right)

    def _check_param(self, param: float) -> None:
        if not self.contains(param):
            raise DomainError(
                f"pole {param} outside window [{self.window.left}, {self.window.right}]"
            )


class NormalizedPoleDictionary(_PoleFamily):
    """Poles scaled to unit L2 norm on the fit interval."""

    kind: Literal["normalized_pole"] = "normalized_pole"
    fit: Optional[Interval] = None

    def bind(self, fit: Interval) -> "NormalizedPoleDictionary":
        """Attach the fit interval unless one is already set."""
        if self.fit is None:
            return self.model_copy(update={"fit": fit})
        return self

    def element(self, param: float) -> Element:
        self._check_param(param)
        if self.fit is None:
            raise DomainError("normalized pole dictionary has no fit interval")
        return Element(
            kind=ElementKind.NORMALIZED_POLE,
            param=float(param),
            scale=normalized_pole_scale(float(param), self.fit),
        )


class PlainPoleDictionary(_PoleFamily):
    """Unscaled simple poles 1/(z - p)."""

    kind: Literal["plain_pole"] = "plain_pole"

    def bind(self, fit: Interval) -> "PlainPoleDictionary":
        return self

    def element(self, param: float) -> Element:
        self._check_param(param)
        return Element(kind=ElementKind.PLAIN_POLE, param=float(param))


class NegativePowerDictionary(FrozenModel):
    """Powers z^(-eta) with eta in [eta_lo, eta_hi] inside (0, 1)."""

    kind: Literal["negative_power"] = "negative_power"
    eta_lo: float = 1e-8
    eta_hi: float = 1.0 - 1e-8

    is_pole_family: ClassVar[bool] = False

    @model_validator(mode="after")
    def _check(self) -> Self:
        if not 0.0 < self.eta_lo < self.eta_hi < 1.0:
            raise ValueError(
                f"exponent range must satisfy 0 < lo < hi < 1, got ({self.eta_lo}, {self.eta_hi})"
            )
        return self

    def bind(self, fit: Interval) -> "NegativePowerDictionary":
        return self

    def contains(self, param: float) -> bool:
        return self.eta_lo <= param <= self.eta_hi

    @property
    def param_bounds(self) -> Tuple[float, float]:
        return self.eta_lo, self.eta_hi

    def search_bounds(self) -> Tuple[float, float]:
        return self.eta_lo, self.eta_hi

    def to_search(self, param: Any) -> Any:
        return np.asarray(param, dtype=float)

    def from_search(self, s: Any) -> Any:
        return np.clip(s, self.eta_lo, self.eta_hi)

    def element(self, param: float) -> Element:
        if not self.contains(param):
            raise DomainError(f"exponent {param} outside [{self.eta_lo}, {self.eta_hi}]")
        return Element(kind=ElementKind.NEGATIVE_POWER, param=float(param))


AnyDictionary = Union[NormalizedPoleDictionary, PlainPoleDictionary, NegativePowerDictionary]
DictionarySpec = Annotated[AnyDictionary, Field(discriminator="kind")]


def eval_element(spec: AnyDictionary, param: float, z: Any) -> FloatArray:
    """Evaluate g_param(z) for a member of the dictionary family `spec`."""
    if not spec.contains(param):
        raise DomainError(f"parameter {param} outside the {spec.kind} parameter set")
    return spec.element(param)(z)


# -----------------------------------------------------------------------------
# Target functions
# -----------------------------------------------------------------------------
class InversePower(FrozenModel):
    """f(z) = z^(-alpha)."""

    kind: Literal["inverse_power"] = "inverse_power"
    alpha: float = Field(0.5, gt=0.0, lt=1.0)

    finite_at_zero: ClassVar[bool] = False

    @property
    def label(self) -> str:
        return f"z^(-{self.alpha:g})"

    def __call__(self, z: Any) -> FloatArray:
        with np.errstate(divide="ignore"):
            return np.power(np.asarray(z, dtype=float), -self.alpha)


class TwoTermFrac(FrozenModel):
    """f(z) = (s z^alpha + t z^beta)^(-1)."""

    kind: Literal["two_term"] = "two_term"
    s: float
    t: float
    alpha: float
    beta: float

    @property
    def finite_at_zero(self) -> bool:
        return (self.alpha < 0.0 and self.s != 0.0) or (self.beta < 0.0 and self.t != 0.0)

    @property
    def label(self) -> str:
        return f"({self.s:g} z^{self.alpha:g} + {self.t:g} z^{self.beta:g})^(-1)"

    def __call__(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = self.s * np.power(z_arr, self.alpha) + self.t * np.power(z_arr, self.beta)
            return 1.0 / denom


class RescaledInterface(FrozenModel):
    """
    Rescaled inverse of the interface operator symbol.

    With gamma0 = max(c^(-1/2), K c^(1/2)) this evaluates
        f~(z~) = (c^(-1/2)/gamma0 z~^(-1/2) + K c^(1/2)/gamma0 z~^(1/2))^(-1)
    on (0, 1], and mu (z^(-1/2) + K z^(1/2))^(-1) = (mu/gamma0) f~(z/c).
    """

    kind: Literal["rescaled_interface"] = "rescaled_interface"
    mu: float = Field(..., gt=0.0)
    K: float = Field(..., gt=0.0)
    c: float = Field(..., gt=0.0)

    finite_at_zero: ClassVar[bool] = True

    @property
    def gamma0(self) -> float:
        return max(self.c**-0.5, self.K * self.c**0.5)

    @property
    def output_scale(self) -> float:
        """Factor mu/gamma0 mapping f~ back to the unscaled symbol."""
        return self.mu / self.gamma0

    @property
    def label(self) -> str:
        return f"rescaled interface (mu={self.mu:g}, K={self.K:g}, c={self.c:g})"

    def __call__(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        a = self.c**-0.5 / self.gamma0
        b = self.K * self.c**0.5 / self.gamma0
        # sqrt(z)/(a + b z) is the same expression without the 0 * inf at z = 0.
        return np.sqrt(z_arr) / (a + b * z_arr)

    def original(self, z: Any) -> FloatArray:
        """mu (z^(-1/2) + K z^(1/2))^(-1) in the unscaled variable."""
        z_arr = np.asarray(z, dtype=float)
        return self.mu * np.sqrt(z_arr) / (1.0 + self.K * z_arr)


class CustomTarget(FrozenModel):
    """Any vectorized pointwise evaluator."""

    kind: Literal["custom"] = "custom"
    evaluator: Callable[..., Any] = Field(..., exclude=True, repr=False)
    label: str = "custom"
    finite_at_zero: bool = True

    def __call__(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        values = np.asarray(self.evaluator(z_arr), dtype=float)
        return np.broadcast_to(values, z_arr.shape).astype(float)


AnyTarget = Union[InversePower, TwoTermFrac, RescaledInterface, CustomTarget]
TargetFunction = Annotated[AnyTarget, Field(discriminator="kind")]
BuiltinTarget = Annotated[
    Union[InversePower, TwoTermFrac, RescaledInterface], Field(discriminator="kind")
]


def check_target_on(f: Any, on: Interval) -> None:
    """Reject intervals that reach 0 for targets singular there."""
    if on.lo == 0.0 and not getattr(f, "finite_at_zero", True):
        raise DomainError(f"{getattr(f, 'label', 'target')} is singular at 0; use lo > 0")


# -----------------------------------------------------------------------------
# Approximants
# -----------------------------------------------------------------------------
class Approximant(FrozenModel):
    """phi = sum_i coeffs[i] * basis[i]."""

    basis: Tuple[Element, ...] = ()
    coeffs: Tuple[float, ...] = ()
    fit: Optional[Interval] = None

    @model_validator(mode="after")
    def _check(self) -> Self:
        if len(self.basis) != len(self.coeffs):
            raise ValueError(
                f"{len(self.basis)} basis elements but {len(self.coeffs)} coefficients"
            )
        for i, g in enumerate(self.basis):
            for h in self.basis[:i]:
                if g.same_parameter(h):
                    raise ValueError(f"duplicate basis parameter {g.param}")
        return self

    @property
    def params(self) -> Tuple[float, ...]:
        return tuple(g.param for g in self.basis)

    @property
    def poles(self) -> Tuple[float, ...]:
        return tuple(g.param for g in self.basis if g.is_pole)

    def __len__(self) -> int:
        return len(self.basis)

    def design_matrix(self, z: Any) -> FloatArray:
        """Columns g_i(z) for a 1-D array of points."""
        z_arr = np.atleast_1d(np.asarray(z, dtype=float))
        if not self.basis:
            return np.zeros((z_arr.size, 0))
        return np.column_stack([g(z_arr) for g in self.basis])

    def __call__(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        if not self.basis:
            return np.zeros_like(z_arr)
        values = self.design_matrix(z_arr.ravel()) @ np.asarray(self.coeffs, dtype=float)
        return values.reshape(z_arr.shape)

    def with_coeffs(self, coeffs: Any) -> "Approximant":
        return self.model_copy(update={"coeffs": tuple(float(c) for c in coeffs)})

    def extend(self, element: Element, coeff: float = 0.0) -> "Approximant":
        return Approximant(
            basis=self.basis + (element,),
            coeffs=self.coeffs + (float(coeff),),
            fit=self.fit,
        )


def eval_approximant(phi: Approximant, z: Any) -> FloatArray:
    """Evaluate sum_i c_i g_i(z); the empty approximant is 0."""
    return phi(z)


class PartialFraction(FrozenModel):
    """R(z) = c0 + sum_j residues[j] / (z - poles[j]) with negative poles."""

    c0: float = 0.0
    residues: Tuple[float, ...] = ()
    poles: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> Self:
        if len(self.residues) != len(self.poles):
            raise ValueError(f"{len(self.residues)} residues but {len(self.poles)} poles")
        if any(not p < 0.0 for p in self.poles):
            raise ValueError("all poles must be negative")
        values = (self.c0,) + self.residues + self.poles
        if not all(math.isfinite(v) for v in values):
            raise ValueError("partial fraction entries must be finite")
        return self

    @property
    def n_poles(self) -> int:
        return len(self.poles)

    @property
    def is_positive(self) -> bool:
        """True when R(A) is SPD for every SPD A (c0 >= 0, residues > 0)."""
        return self.c0 >= 0.0 and all(r > 0.0 for r in self.residues)

    def __call__(self, z: Any) -> FloatArray:
        z_arr = np.asarray(z, dtype=float)
        if not self.poles:
            return np.full_like(z_arr, self.c0)
        flat = z_arr.reshape(-1, 1)
        terms = np.asarray(self.residues) / (flat - np.asarray(self.poles))
        return (self.c0 + terms.sum(axis=1)).reshape(z_arr.shape)

    def evaluate(self, z: Any) -> FloatArray:
        """R at scalar or array z."""
        return self(z)

    def rescaled(self, z_scale: float, factor: float = 1.0) -> "PartialFraction":
        """factor * R(z / z_scale) written in the unscaled variable z."""
        return PartialFraction(
            c0=factor * self.c0,
            residues=tuple(factor * z_scale * r for r in self.residues),
            poles=tuple(z_scale * p for p in self.poles),
        )


# -----------------------------------------------------------------------------
# Traces
# -----------------------------------------------------------------------------
class IterationRecord(FrozenModel):
    """State after greedy iteration j."""

    j: int = Field(..., ge=1)
    param: float
    coeffs: Tuple[float, ...]
    uniform_error: float = Field(..., ge=0.0)
    l2_error: float = Field(..., ge=0.0)
    minimax: bool = False
    flags: Tuple[str, ...] = ()


class GreedyTrace(FrozenModel):
    """Per-iteration history plus the final approximant of one greedy run."""

    algorithm: str
    mode: Optional[str] = None
    iterations: Tuple[IterationRecord, ...] = ()
    final: Approximant = Field(default_factory=Approximant)

    @property
    def params(self) -> Tuple[float, ...]:
        return tuple(it.param for it in self.iterations)

    @property
    def uniform_errors(self) -> Tuple[float, ...]:
        return tuple(it.uniform_error for it in self.iterations)

    @property
    def l2_errors(self) -> Tuple[float, ...]:
        return tuple(it.l2_error for it in self.iterations)

    @property
    def flags(self) -> Tuple[str, ...]:
        return tuple(sorted({flag for it in self.iterations for flag in it.flags}))

    @property
    def final_error(self) -> float:
        return self.iterations[-1].uniform_error if self.iterations else math.inf

    def is_non_increasing(self, tol: float = 1e-12) -> bool:
        errs = self.uniform_errors
        return all(b <= a + tol for a, b in zip(errs, errs[1:]))
