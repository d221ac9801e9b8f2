"""
Greedy drivers: OGA, improved OGA and WCGA, plus the particle-swarm search.

Public surface:
- pso_maximize: seeded particle swarm on a closed interval, vectorized objective.
- run_oga: greedy selection by |(r, g)| / ||g||, then L2 projection.
- run_improved_oga: OGA plus minimax coefficients (final step or every step).
- run_wcga: weak Chebyshev greedy steps with first-improvement window scans.
- weak_greedy_window: the shrunken pole window for one WCGA step.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field
from scipy.optimize import brentq, minimize_scalar

from ratgreedy.analysis import (
    CompositeRule,
    GridSpec,
    QuadratureRule,
    element_inner,
    inner_product,
    l2_error,
    norming_point,
    solve_gram,
    uniform_error,
)
from ratgreedy.domain import (
    AnyDictionary,
    Approximant,
    Element,
    FloatArray,
    FrozenModel,
    GreedyTrace,
    Interval,
    IterationRecord,
    NormalizedPoleDictionary,
    PlainPoleDictionary,
    PoleWindow,
    check_target_on,
    pole_pair_integral,
    power_integral,
)
from ratgreedy.errors import DomainError, DuplicateParameterError, ResidualConverged
from ratgreedy.minimax import MinimaxProblem, MinimaxResult, best_uniform_coeffs
from ratgreedy.settings import get_settings

logger = logging.getLogger(__name__)

StopRule = Callable[[Approximant], bool]

FLAG_PERTURBED = "perturbed_duplicate"
FLAG_TRUNCATED = "spectral_truncation"
FLAG_MINIMAX_NOT_CONVERGED = "minimax_not_converged"
FLAG_DEGENERATE_WINDOW = "degenerate_window"
FLAG_FALLBACK = "fallback_right_endpoint"

_DUPLICATE_SHIFT = 1e-12


# -----------------------------------------------------------------------------
# Particle swarm
# -----------------------------------------------------------------------------
class PsoConfig(FrozenModel):
    """Particle swarm hyperparameters; a fixed seed makes runs repeatable."""

    swarm_size: int = Field(40, ge=2)
    iterations: int = Field(200, ge=1)
    inertia: float = Field(0.7, ge=0.0)
    cognitive: float = Field(1.5, ge=0.0)
    social: float = Field(1.5, ge=0.0)
    seed: int = Field(0, ge=0)
    polish: bool = True
    scan_points: int = Field(2000, ge=0, description="uniform pre-scan of the window; 0 disables")
    scan_peaks: int = Field(3, ge=0, description="scan local maxima polished next to the swarm best")


class PsoResult(NamedTuple):
    arg: float
    value: float


def _evaluate(objective: Callable[[FloatArray], Any], x: FloatArray) -> FloatArray:
    values = np.asarray(objective(x), dtype=float).reshape(x.shape)
    return np.where(np.isfinite(values), values, -np.inf)


def _scan_peaks(xs: FloatArray, fs: FloatArray, count: int) -> List[float]:
    """Abscissae of the `count` largest local maxima of a sampled objective."""
    padded = np.concatenate(([-np.inf], fs, [-np.inf]))
    is_peak = (fs >= padded[:-2]) & (fs >= padded[2:]) & np.isfinite(fs)
    peaks = np.flatnonzero(is_peak)
    order = peaks[np.argsort(-fs[peaks], kind="stable")]
    return [float(xs[i]) for i in order[:count]]


def _polish(
    objective: Callable[[FloatArray], Any], center: float, radius: float, lo: float, hi: float
) -> PsoResult:
    a, b = max(lo, center - radius), min(hi, center + radius)
    res = minimize_scalar(
        lambda s: -float(_evaluate(objective, np.array([s]))[0]),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(center))},
    )
    return PsoResult(float(res.x), -float(res.fun))


def _refine_stationary(
    objective: Callable[[FloatArray], Any],
    slope: Callable[[float], float],
    best: PsoResult,
    radius: float,
    lo: float,
    hi: float,
) -> PsoResult:
    """Root of the objective's derivative bracketing `best`, kept only if it is no worse."""
    x = best.arg
    for half in (1e-6 * max(1.0, abs(x)), radius):
        a, b = max(lo, x - half), min(hi, x + half)
        if not a < x < b:
            continue
        try:
            sa, sb = slope(a), slope(b)
        except (ArithmeticError, ValueError):
            return best
        if not (np.isfinite(sa) and np.isfinite(sb) and sa > 0.0 > sb):
            continue
        root = brentq(slope, a, b, xtol=1e-15, rtol=4.0 * np.finfo(float).eps)
        value = float(_evaluate(objective, np.array([root]))[0])
        if value >= best.value * (1.0 - 1e-12):
            return PsoResult(float(root), value)
        return best
    return best


def pso_maximize(
    objective: Callable[[FloatArray], Any],
    window: Tuple[float, float],
    cfg: PsoConfig = PsoConfig(),
    rng: Optional[np.random.Generator] = None,
    slope: Optional[Callable[[float], float]] = None,
) -> PsoResult:
    """
    Maximize a vectorized objective over [window[0], window[1]].

    A uniform scan of `cfg.scan_points` points seeds the first particle with
    the best sample; the rest of the swarm starts stratified over the window.
    Velocities are clamped to a quarter of the width and positions are clipped
    to the window. With `cfg.polish` the swarm best and the largest scan peaks
    are refined by bounded scalar searches, and when `slope` (the derivative
    of the objective) is given the winner is sharpened to a root of it.
    """
    lo, hi = float(window[0]), float(window[1])
    if lo > hi:
        raise DomainError(f"empty search window [{lo}, {hi}]")
    if lo == hi:
        return PsoResult(lo, float(_evaluate(objective, np.array([lo]))[0]))

    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    n = cfg.swarm_size
    width = hi - lo
    v_max = 0.25 * width

    x = lo + (np.arange(n) + rng.random(n)) * (width / n)
    v = rng.uniform(-0.1, 0.1, n) * width
    peaks: List[float] = []
    spacing = width / n
    if cfg.scan_points >= 2:
        xs = np.linspace(lo, hi, cfg.scan_points)
        fs = _evaluate(objective, xs)
        peaks = _scan_peaks(xs, fs, max(1, cfg.scan_peaks))
        x[0] = peaks[0] if peaks else x[0]
        spacing = width / (cfg.scan_points - 1)
    best_x = x.copy()
    best_f = _evaluate(objective, x)
    g = int(np.argmax(best_f))
    g_x, g_f = float(best_x[g]), float(best_f[g])

    for _ in range(cfg.iterations):
        r1, r2 = rng.random(n), rng.random(n)
        v = cfg.inertia * v + cfg.cognitive * r1 * (best_x - x) + cfg.social * r2 * (g_x - x)
        v = np.clip(v, -v_max, v_max)
        x = np.clip(x + v, lo, hi)
        fx = _evaluate(objective, x)
        improved = fx > best_f
        best_x[improved] = x[improved]
        best_f[improved] = fx[improved]
        g = int(np.argmax(best_f))
        if best_f[g] > g_f:
            g_x, g_f = float(best_x[g]), float(best_f[g])

    best = PsoResult(g_x, g_f)
    if not cfg.polish:
        return best

    starts = [(g_x, width / n)]
    starts += [(p, 2.0 * spacing) for p in peaks[: cfg.scan_peaks]]
    for center, radius in starts:
        polished = _polish(objective, center, radius, lo, hi)
        if polished.value > best.value:
            best = polished
    if slope is not None:
        best = _refine_stationary(objective, slope, best, 2.0 * spacing, lo, hi)
    return best


# -----------------------------------------------------------------------------
# Shared driver state
# -----------------------------------------------------------------------------
class Algorithm(str, Enum):
    """Greedy drivers selectable from configs."""

    OGA = "oga"
    IMPROVED_OGA = "improved_oga"
    WCGA = "wcga"


class ImprovedMode(str, Enum):
    """Where improved OGA applies the minimax step."""

    FINAL_ONLY = "final_only"
    EVERY_STEP = "every_step"


class _Driver:
    """Target, bound dictionary and numerics shared by one greedy run."""

    def __init__(
        self,
        f: Callable[..., Any],
        dictionary: AnyDictionary,
        on: Interval,
        eval_on: Optional[Interval],
        grid: GridSpec,
        rule: QuadratureRule,
        composite: CompositeRule,
    ):
        self.eval_on = eval_on or on
        check_target_on(f, on)
        check_target_on(f, self.eval_on)
        self.f = f
        self.spec = dictionary.bind(on)
        self.fit = on
        self.grid = grid
        self.rule = rule
        self.composite = composite
        self._moments: Dict[Tuple[str, float], float] = {}

    # -- evaluation ---------------------------------------------------------
    def residual(self, phi: Approximant) -> Callable[[FloatArray], FloatArray]:
        return lambda z: np.asarray(self.f(z), dtype=float) - phi(z)

    def uniform(self, phi: Approximant) -> float:
        return uniform_error(self.f, phi, self.eval_on, self.grid).value

    def record(
        self,
        j: int,
        param: float,
        phi: Approximant,
        flags: Sequence[str],
        *,
        error: Optional[float] = None,
        minimax: bool = False,
    ) -> IterationRecord:
        rec = IterationRecord(
            j=j,
            param=param,
            coeffs=phi.coeffs,
            uniform_error=self.uniform(phi) if error is None else error,
            l2_error=l2_error(self.f, phi, self.fit, self.rule),
            minimax=minimax,
            flags=tuple(flags),
        )
        logger.info(
            "Iteration %d: param=%.6e uniform_error=%.3e l2_error=%.3e%s",
            rec.j,
            rec.param,
            rec.uniform_error,
            rec.l2_error,
            f" flags={','.join(rec.flags)}" if rec.flags else "",
        )
        return rec

    # -- greedy selection ---------------------------------------------------
    def objective(self, phi: Approximant) -> Callable[[FloatArray], FloatArray]:
        """s -> |(r, g_s)| / ||g_s|| with the fixed composite rule on the fit interval."""
        nodes, weights = self.composite.nodes_weights(self.fit)
        weighted_residual = weights * self.residual(phi)(nodes)
        spec, lo, hi = self.spec, self.fit.lo, self.fit.hi

        def evaluate(s: FloatArray) -> FloatArray:
            params = np.atleast_1d(np.asarray(spec.from_search(s), dtype=float))
            if spec.is_pole_family:
                columns = 1.0 / (nodes[None, :] - params[:, None])
                norms = np.sqrt(pole_pair_integral(params, params, lo, hi))
            else:
                with np.errstate(divide="ignore"):
                    columns = np.power(nodes[None, :], -params[:, None])
                norms = np.sqrt(power_integral(2.0 * params, lo, hi))
            return np.abs(columns @ weighted_residual) / norms

        return evaluate

    def objective_slope(self, phi: Approximant) -> Callable[[float], float]:
        """
        Quantity with the sign of d/ds of the selection objective.

        With A = (r, g_p) and N = ||g_p||^2 the squared objective is A^2 / N,
        whose derivative in p has the sign of A (2 A' N - A N').
        """
        nodes, weights = self.composite.nodes_weights(self.fit)
        weighted_residual = weights * self.residual(phi)(nodes)
        spec, lo, hi = self.spec, self.fit.lo, self.fit.hi
        log_nodes = np.log(nodes)

        def slope(s: float) -> float:
            p = float(np.asarray(spec.from_search(s), dtype=float))
            if spec.is_pole_family:
                column = 1.0 / (nodes - p)
                a = float(column @ weighted_residual)
                da = float((column * column) @ weighted_residual)
                norm_sq = float(pole_pair_integral(p, p, lo, hi))
                d_norm_sq = 1.0 / (lo - p) ** 2 - 1.0 / (hi - p) ** 2
                dp_ds = math.log(10.0) * p
            else:
                column = np.power(nodes, -p)
                a = float(column @ weighted_residual)
                da = -float((log_nodes * column) @ weighted_residual)
                norm_sq = float(power_integral(2.0 * p, lo, hi))
                d_norm_sq = -2.0 * float((log_nodes * column * column) @ weights)
                dp_ds = 1.0
            return a * (2.0 * da * norm_sq - a * d_norm_sq) * dp_ds

        return slope

    def select(self, phi: Approximant, pso: PsoConfig, rng: np.random.Generator) -> float:
        result = pso_maximize(
            self.objective(phi), self.spec.search_bounds(), pso, rng, slope=self.objective_slope(phi)
        )
        param = float(self.spec.from_search(result.arg))
        logger.debug("Swarm best: param=%.6e objective=%.6e", param, result.value)
        return param

    def dedupe(self, param: float, used: Sequence[float]) -> Tuple[float, Tuple[str, ...]]:
        """Shift a repeated parameter by 1e-12 |p| toward the window interior, once."""
        if param not in used:
            return param, ()
        lo, hi = self.spec.param_bounds
        step = _DUPLICATE_SHIFT * max(abs(param), 1.0e-300)
        shifted = param + step if param < 0.5 * (lo + hi) else param - step
        if shifted in used or not self.spec.contains(shifted):
            raise DuplicateParameterError(f"parameter {param} selected twice")
        logger.warning("Parameter %.6e already in basis; perturbed to %.17g", param, shifted)
        return shifted, (FLAG_PERTURBED,)

    # -- L2 projection ------------------------------------------------------
    def moment(self, g: Element) -> float:
        key = (g.kind.value, g.param)
        if key not in self._moments:
            self._moments[key] = inner_product(self.f, g, self.fit, self.rule)
        return self._moments[key]

    def project(self, basis: Tuple[Element, ...]) -> Tuple[Approximant, bool]:
        k = len(basis)
        gram = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                gram[i, j] = gram[j, i] = element_inner(basis[i], basis[j], self.fit, self.rule)
        moments = np.array([self.moment(g) for g in basis])
        projection = solve_gram(gram, moments)
        return Approximant(basis=basis, coeffs=tuple(projection.coeffs), fit=self.fit), projection.truncated

    def oga_step(
        self, phi: Approximant, pso: PsoConfig, rng: np.random.Generator
    ) -> Tuple[Approximant, float, Tuple[str, ...]]:
        param = self.select(phi, pso, rng)
        param, flags = self.dedupe(param, phi.params)
        projected, truncated = self.project(phi.basis + (self.spec.element(param),))
        if truncated:
            flags += (FLAG_TRUNCATED,)
        return projected, param, flags

    # -- minimax ------------------------------------------------------------
    def minimax(self, basis: Tuple[Element, ...], init: Sequence[float]) -> Tuple[Approximant, MinimaxResult]:
        result = best_uniform_coeffs(
            MinimaxProblem(
                f=self.f,
                basis=basis,
                on=self.eval_on,
                init=tuple(float(c) for c in init),
                grid=self.grid,
            )
        )
        return Approximant(basis=basis, coeffs=tuple(result.coeffs), fit=self.fit), result


def _should_stop(
    rec: IterationRecord, phi: Approximant, target_error: Optional[float], stop_rule: Optional[StopRule]
) -> bool:
    if target_error is not None and rec.uniform_error <= target_error:
        logger.info("Target error %.3e reached at iteration %d", target_error, rec.j)
        return True
    if stop_rule is not None and stop_rule(phi):
        logger.info("Stop rule satisfied at iteration %d", rec.j)
        return True
    return False


# -----------------------------------------------------------------------------
# OGA
# -----------------------------------------------------------------------------
def run_oga(
    f: Callable[..., Any],
    dictionary: AnyDictionary,
    on: Interval,
    n: int,
    pso: PsoConfig = PsoConfig(),
    *,
    eval_on: Optional[Interval] = None,
    grid: GridSpec = GridSpec(),
    rule: QuadratureRule = QuadratureRule(),
    composite: CompositeRule = CompositeRule(),
    target_error: Optional[float] = None,
    stop_rule: Optional[StopRule] = None,
) -> GreedyTrace:
    """Orthogonal greedy algorithm: n selections, each followed by L2 projection on `on`."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    driver = _Driver(f, dictionary, on, eval_on, grid, rule, composite)
    rng = np.random.default_rng(pso.seed)

    phi = Approximant(fit=on)
    records: List[IterationRecord] = []
    for j in range(1, n + 1):
        phi, param, flags = driver.oga_step(phi, pso, rng)
        rec = driver.record(j, param, phi, flags)
        records.append(rec)
        if _should_stop(rec, phi, target_error, stop_rule):
            break
    return GreedyTrace(algorithm="oga", iterations=tuple(records), final=phi)


# -----------------------------------------------------------------------------
# Improved OGA
# -----------------------------------------------------------------------------
def run_improved_oga(
    f: Callable[..., Any],
    dictionary: AnyDictionary,
    on: Interval,
    n: int,
    pso: PsoConfig = PsoConfig(),
    mode: ImprovedMode = ImprovedMode.FINAL_ONLY,
    *,
    eval_on: Optional[Interval] = None,
    grid: GridSpec = GridSpec(),
    rule: QuadratureRule = QuadratureRule(),
    composite: CompositeRule = CompositeRule(),
    target_error: Optional[float] = None,
    stop_rule: Optional[StopRule] = None,
) -> GreedyTrace:
    """
    OGA selections with minimax coefficients on the evaluation interval.

    The greedy selections follow the plain OGA projection path, so for the
    same seed the basis at step j matches run_oga's. final_only minimaxes
    once at j = n; every_step minimaxes at every j, warm-started from the
    better of the projection and the previous minimax coefficients padded
    with a zero.
    """
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    mode = ImprovedMode(mode)
    if mode is ImprovedMode.FINAL_ONLY and (target_error is not None or stop_rule is not None):
        raise DomainError("early stopping needs mode every_step")
    driver = _Driver(f, dictionary, on, eval_on, grid, rule, composite)
    rng = np.random.default_rng(pso.seed)

    projected = Approximant(fit=on)
    best = Approximant(fit=on)
    records: List[IterationRecord] = []
    for j in range(1, n + 1):
        projected, param, flags = driver.oga_step(projected, pso, rng)
        if mode is ImprovedMode.FINAL_ONLY and j < n:
            records.append(driver.record(j, param, projected, flags))
            best = projected
            continue

        init = projected.coeffs
        if mode is ImprovedMode.EVERY_STEP and j > 1 and driver.uniform(best) < driver.uniform(projected):
            init = best.coeffs + (0.0,)
        best, result = driver.minimax(projected.basis, init)
        if not result.converged:
            flags += (FLAG_MINIMAX_NOT_CONVERGED,)
        rec = driver.record(j, param, best, flags, error=result.error, minimax=True)
        records.append(rec)
        if mode is ImprovedMode.EVERY_STEP and _should_stop(rec, best, target_error, stop_rule):
            break

    return GreedyTrace(
        algorithm="improved_oga", mode=mode.value, iterations=tuple(records), final=best
    )


# -----------------------------------------------------------------------------
# WCGA
# -----------------------------------------------------------------------------
class TKind(str, Enum):
    """Weakness sequences t_k."""

    INV_SQRT = "inv_sqrt"
    CONSTANT = "constant"


class WcgaConfig(FrozenModel):
    """Weakness sequence, window discretization and stopping for WCGA."""

    t_kind: TKind = TKind.INV_SQRT
    t_value: float = Field(1.0, gt=0.0, le=1.0, description="t_k for t_kind=constant")
    t_sequence: Optional[Callable[[int], float]] = Field(default=None, exclude=True, repr=False)
    m: int = Field(100, ge=1)
    max_terms: int = Field(12, ge=1)
    target_error: Optional[float] = Field(None, gt=0.0)
    workers: int = Field(1, ge=1, le=64, description="capped by MAX_CONCURRENT_JOBS")
    polish_iters: int = Field(60, ge=0, description="window search after acceptance; 0 disables")

    def t(self, k: int) -> float:
        if self.t_sequence is not None:
            value = float(self.t_sequence(k))
        elif self.t_kind is TKind.INV_SQRT:
            value = 1.0 / math.sqrt(k)
        else:
            value = self.t_value
        if not 0.0 < value <= 1.0:
            raise DomainError(f"t_{k} = {value} outside (0, 1]")
        return value


def weak_greedy_window(z_star: float, sign: float, t: float, window: PoleWindow) -> Tuple[float, float]:
    """
    Poles p in `window` with <F_r, 1/(z - p)> within factor t of the best.

    sign > 0 keeps p >= z* - (z* - right)/t, so 1/(z* - p) >= t / (z* - right).
    sign < 0 keeps p <= z* - t (z* - left), so -1/(z* - p) >= -1/(t (z* - left)).
    The result collapses to a single point when t == 1.
    """
    if not 0.0 < t <= 1.0:
        raise DomainError(f"weakness parameter {t} outside (0, 1]")
    left, right = window.left, window.right
    if sign >= 0.0:
        lo, hi = max(left, z_star - (z_star - right) / t), right
    else:
        lo, hi = left, min(right, z_star - t * (z_star - left))
    return min(lo, hi), hi


def _scan_candidates(
    driver: _Driver,
    phi: Approximant,
    candidates: Sequence[float],
    previous: float,
    workers: int,
) -> Optional[Tuple[float, Approximant, MinimaxResult]]:
    """First candidate (ascending index) whose minimax error is strictly below `previous`."""
    init = phi.coeffs + (0.0,)

    def solve(param: float) -> Tuple[float, Approximant, MinimaxResult]:
        basis = phi.basis + (driver.spec.element(param),)
        return (param,) + driver.minimax(basis, init)

    fresh = [p for p in candidates if p not in phi.params]
    if workers <= 1:
        for param in fresh:
            outcome = solve(param)
            if outcome[2].error < previous:
                return outcome
        return None

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(fresh), workers):
            for outcome in pool.map(solve, fresh[start : start + workers]):
                if outcome[2].error < previous:
                    return outcome
    return None


def _polish_in_window(
    driver: _Driver,
    phi: Approximant,
    window: Tuple[float, float],
    accepted: Tuple[float, Approximant, MinimaxResult],
    iterations: int,
) -> Tuple[float, Approximant, MinimaxResult]:
    """
    Bounded search of the minimax error over the step window, started after acceptance.

    A second search in offsets around the best point resolves it below the
    relative tolerance of the first; a pole from either search replaces the
    accepted one only when its error is strictly lower.
    """
    lo, hi = window
    if iterations < 1 or lo >= hi:
        return accepted
    init = phi.coeffs + (0.0,)
    solved: Dict[float, Tuple[float, Approximant, MinimaxResult]] = {accepted[0]: accepted}

    def error_at(s: float) -> float:
        param = float(driver.spec.from_search(s))
        if param in phi.params:
            return math.inf
        if param not in solved:
            solved[param] = (param,) + driver.minimax(phi.basis + (driver.spec.element(param),), init)
        return solved[param][2].error

    def search(center: float, a: float, b: float) -> None:
        minimize_scalar(
            lambda u: error_at(center + u),
            bounds=(a - center, b - center),
            method="bounded",
            options={"maxiter": iterations, "xatol": 1e-15},
        )

    a, b = sorted(float(v) for v in driver.spec.to_search(np.array([lo, hi])))
    search(a, a, b)
    best = min(solved.values(), key=lambda outcome: outcome[2].error)
    if best[0] != accepted[0]:
        s = float(driver.spec.to_search(best[0]))
        half = 1e-6 * max(1.0, abs(s))
        search(s, max(a, s - half), min(b, s + half))
        best = min(solved.values(), key=lambda outcome: outcome[2].error)
    if best[2].error < accepted[2].error:
        logger.debug(
            "Window search moved %.6e to %.17g (%.3e -> %.3e)",
            accepted[0],
            best[0],
            accepted[2].error,
            best[2].error,
        )
        return best
    return accepted


def run_wcga(
    f: Callable[..., Any],
    dictionary: AnyDictionary,
    on: Interval,
    cfg: WcgaConfig = WcgaConfig(),
    *,
    eval_on: Optional[Interval] = None,
    grid: GridSpec = GridSpec(),
    rule: QuadratureRule = QuadratureRule(),
    stop_rule: Optional[StopRule] = None,
) -> GreedyTrace:
    """
    Weak Chebyshev greedy algorithm in the uniform norm on the evaluation interval.

    Plain-pole dictionaries scan the window from `weak_greedy_window`; power
    dictionaries scan their whole exponent range. Either way the first of the
    m + 1 candidates that strictly lowers the minimax error is accepted, then
    a bounded search over the same window may move it to a pole with a lower
    error. When no candidate improves, the right endpoint joins the basis
    with a zero coefficient.
    """
    if isinstance(dictionary, NormalizedPoleDictionary):
        raise DomainError("WCGA runs on plain_pole or negative_power dictionaries")
    driver = _Driver(f, dictionary, on, eval_on, grid, rule, CompositeRule())
    workers = min(cfg.workers, get_settings().MAX_CONCURRENT_JOBS)
    phi = Approximant(fit=on)
    records: List[IterationRecord] = []

    for k in range(1, cfg.max_terms + 1):
        try:
            norm = norming_point(driver.residual(phi), driver.eval_on, grid)
        except ResidualConverged as exc:
            logger.info("Residual converged before iteration %d (%.3e)", k, exc.norm)
            break
        t = cfg.t(k)
        flags: Tuple[str, ...] = ()
        if isinstance(driver.spec, PlainPoleDictionary):
            lo, hi = weak_greedy_window(norm.argmax, norm.sign, t, driver.spec.window)
        else:
            lo, hi = driver.spec.param_bounds
        if lo >= hi:
            flags += (FLAG_DEGENERATE_WINDOW,)
            logger.warning("Degenerate window at iteration %d; using the single point %.6e", k, hi)
            candidates = [hi]
        else:
            candidates = [float(p) for p in np.linspace(lo, hi, cfg.m + 1)]
        logger.debug("WCGA iteration %d: z*=%.6e sign=%+.0f t=%.4f window=[%.6e, %.6e]", k, norm.argmax, norm.sign, t, lo, hi)

        accepted = _scan_candidates(driver, phi, candidates, norm.value, workers)
        if accepted is not None:
            accepted = _polish_in_window(driver, phi, (lo, hi), accepted, cfg.polish_iters)
            param, phi, result = accepted
            error = result.error
            if not result.converged:
                flags += (FLAG_MINIMAX_NOT_CONVERGED,)
        else:
            param, dup_flags = driver.dedupe(hi, phi.params)
            flags += dup_flags + (FLAG_FALLBACK,)
            phi = phi.extend(driver.spec.element(param), 0.0)
            error = norm.value

        rec = driver.record(k, param, phi, flags, error=error, minimax=True)
        records.append(rec)
        if _should_stop(rec, phi, cfg.target_error, stop_rule):
            break

    return GreedyTrace(algorithm="wcga", iterations=tuple(records), final=phi)
