"""Luxemburg and Orlicz norms, the finiteness threshold θ and the distance to E.

All searches here are bisections on monotone maps driven by the three-valued
modular oracle: Finite, Divergent, or an exception for inconclusive outcomes.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from config.settings import (
    BRACKET_DOUBLINGS,
    CONSISTENCY_FACTOR,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DISTANCE_SCHEDULE,
    DISTANCE_TOL,
    NORM_TOL,
    ORLICZ_ITERATIONS,
    THETA_REL_TOL,
)
from core.errors import (
    ConsistencyError,
    InconclusiveError,
    ParameterError,
    PreconditionError,
    QuadratureOverflowError,
)
from core.exponent_model import (
    Exponent,
    LogExponent,
    dual_exponent,
    exponent_supremum,
)
from core.function_model import (
    Func,
    Scaled,
    canonical,
    is_bounded,
    is_zero,
    random_piecewise_linear,
    residual_above_level,
    sup_norm_argmax,
)
from core.modular_kernel import (
    QuadConfig,
    integrate_abs_product,
    modular_scaled,
    peel_masks,
    profile_integral,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormResult:
    value: float
    bracket: tuple[float, float]
    iterations: int = 0
    diagnostics: str = ""
    provenance: str = "quadrature"


@dataclass(frozen=True)
class DistanceTrace:
    levels: tuple[float, ...]
    values: tuple[float, ...]
    limit_estimate: float
    theta_crosscheck: float
    converged: bool = True
    diagnostics: str = ""


@dataclass(frozen=True)
class HolderCheck:
    lhs: float
    rhs: float
    ratio: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


@dataclass(frozen=True)
class RegularFunctionalReport:
    orlicz: NormResult
    samples: int
    max_pairing: float
    violations: int = 0
    details: list[str] = field(default_factory=list)


class _ModularOracle:
    """ρ(f/λ) with provenance bookkeeping across one search."""

    def __init__(self, f: Func, p: Exponent, cfg: QuadConfig | None):
        self.f = f
        self.p = p
        self.cfg = cfg or QuadConfig()
        self.calls = 0
        self.closed_form = True
        self.saw_divergence = False

    def _evaluate(self, lam: float):
        self.calls += 1
        result = modular_scaled(self.f, self.p, lam, self.cfg)
        if result.provenance != "closed-form":
            self.closed_form = False
        if not result.is_finite:
            self.saw_divergence = True
        return result

    def rho(self, lam: float) -> float:
        """Modular value, with divergence and overflow both read as +inf."""
        try:
            result = self._evaluate(lam)
        except QuadratureOverflowError:
            return math.inf
        return result.value if result.is_finite else math.inf

    def finite(self, lam: float) -> bool:
        try:
            return self._evaluate(lam).is_finite
        except QuadratureOverflowError:
            return True

    @property
    def provenance(self) -> str:
        return "closed-form" if self.closed_form else "quadrature"


def _start_scale(f: Func) -> float:
    if not is_bounded(f):
        return 1.0
    return max(1.0, sup_norm_argmax(f).value)


def _check_tol(tol: float):
    if not tol > 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")


def _vanishes(f: Func, p: Exponent) -> bool:
    """f = 0 a.e., reading level-set masks of p through their exact windows."""
    factor, inner, window = peel_masks(f, p)
    return factor == 0.0 or window[0] >= window[1] or is_zero(inner)


def luxemburg_norm(
    f: Func, p: Exponent, tol: float = NORM_TOL, cfg: QuadConfig | None = None
) -> NormResult:
    """‖f‖ = inf{λ > 0 : ρ(f/λ) <= 1} by bisection; ρ(f/hi) <= 1 is certified."""
    _check_tol(tol)
    if _vanishes(f, p):
        return NormResult(0.0, (0.0, 0.0), diagnostics="zero function", provenance="closed-form")

    oracle = _ModularOracle(f, p, cfg)
    hi = _start_scale(f)
    doublings = 0
    while oracle.rho(hi) > 1.0:
        hi *= 2.0
        doublings += 1
        if doublings > BRACKET_DOUBLINGS:
            raise InconclusiveError(f"no scale with ρ(f/λ) <= 1 up to λ = {hi:.3g}", reason="bracket")

    lo = 0.5 * hi
    while (value := oracle.rho(lo)) <= 1.0:
        if value == 0.0:
            return NormResult(0.0, (0.0, lo), 0, "modular vanishes", oracle.provenance)
        hi, lo = lo, 0.5 * lo
        doublings += 1
        if doublings > BRACKET_DOUBLINGS:
            raise InconclusiveError(f"ρ(f/λ) <= 1 down to λ = {lo:.3g}", reason="bracket")

    iterations = 0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if oracle.rho(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        iterations += 1

    diagnostics = "finiteness jump inside the bracket" if oracle.saw_divergence else ""
    logger.debug("luxemburg norm %.12g after %d bisections (%d modular calls)", hi, iterations, oracle.calls)
    return NormResult(hi, (lo, hi), iterations, diagnostics, oracle.provenance)


def _bounded_on_support(f: Func, p: Exponent) -> bool:
    if exponent_supremum(p) < math.inf:
        return True
    _, inner, window = peel_masks(f, p)
    if window[1] < math.inf:
        return True
    if isinstance(p, LogExponent):
        support = [piece.a for piece in canonical(inner) if not piece.is_zero()]
        return not support or min(support) > 0.0
    return False


def theta(
    f: Func, p: Exponent, tol: float = THETA_REL_TOL, cfg: QuadConfig | None = None
) -> NormResult:
    """θ(f) = inf{λ > 0 : ρ(f/λ) < ∞}, the germ norm of f.

    Exact 0 when p is bounded on the support of f, otherwise bisection with
    relative tolerance `tol` between a divergent and a finite scale.
    """
    _check_tol(tol)
    if _vanishes(f, p) or _bounded_on_support(f, p):
        return NormResult(0.0, (0.0, 0.0), diagnostics="exponent bounded on the support", provenance="closed-form")

    oracle = _ModularOracle(f, p, cfg)
    hi = _start_scale(f)
    doublings = 0
    while not oracle.finite(hi):
        hi *= 2.0
        doublings += 1
        if doublings > BRACKET_DOUBLINGS:
            raise InconclusiveError(f"ρ(f/λ) divergent up to λ = {hi:.3g}", reason="bracket")

    floor = tol * hi
    lo = hi
    while oracle.finite(lo):
        if lo < floor:
            logger.debug("theta certified 0: finite down to λ = %.3g", lo)
            return NormResult(0.0, (0.0, lo), 0, "finite at every probed scale", oracle.provenance)
        hi, lo = lo, 0.5 * lo

    iterations = 0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if oracle.finite(mid):
            hi = mid
        else:
            lo = mid
        iterations += 1

    value = 0.5 * (lo + hi)
    logger.debug("theta %.9g in [%.9g, %.9g] after %d bisections", value, lo, hi, iterations)
    return NormResult(value, (lo, hi), iterations, "", oracle.provenance)


def distance_to_E(
    f: Func,
    p: Exponent,
    schedule=DISTANCE_SCHEDULE,
    tol: float = DISTANCE_TOL,
    cfg: QuadConfig | None = None,
) -> DistanceTrace:
    """Trace n ↦ ‖f − f·χ_{Ωn}‖ and its limit, cross-checked against θ(f)."""
    _check_tol(tol)
    levels = tuple(float(n) for n in schedule)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ParameterError("distance schedule must be a non-empty increasing sequence")

    values = []
    for n in levels:
        residual = residual_above_level(f, p, n)
        values.append(luxemburg_norm(residual, p, NORM_TOL, cfg).value)
        logger.debug("distance trace n=%g value=%.9g", n, values[-1])

    converged = len(values) == 1 or abs(values[-1] - values[-2]) < tol
    germ = theta(f, p, THETA_REL_TOL, cfg).value
    limit = values[-1]
    if not converged:
        logger.warning("distance trace did not settle within the schedule (last step %.3g)",
                       abs(values[-1] - values[-2]))
        return DistanceTrace(levels, tuple(values), limit, germ, False, "trace did not settle")

    if abs(limit - germ) > CONSISTENCY_FACTOR * tol:
        raise ConsistencyError(
            f"distance limit {limit:.9g} and theta {germ:.9g} differ by more than {CONSISTENCY_FACTOR * tol:.3g}"
        )
    return DistanceTrace(levels, tuple(values), limit, germ)


def _profile(v: Func, p: Exponent, mu: float, cfg: QuadConfig):
    """(ρ(x_mu), ∫ v x_mu), with divergence and overflow read as +inf."""
    try:
        rho = profile_integral(v, p, "modular", mu, cfg)
        pairing = profile_integral(v, p, "pairing", mu, cfg)
    except QuadratureOverflowError:
        return math.inf, math.inf
    if not (rho.is_finite and pairing.is_finite):
        return math.inf, math.inf
    return rho.value, pairing.value


def orlicz_norm(
    v: Func, p: Exponent, tol: float = NORM_TOL, cfg: QuadConfig | None = None
) -> NormResult:
    """‖v‖⁰ = sup{∫ v x : ρ(x) <= 1} through the Lagrange profile x_mu.

    The bracket is certified: its lower end is ∫ v x_mu at a feasible mu, its
    upper end the Lagrangian bound ∫ v x_mu − mu (ρ(x_mu) − 1), valid for every mu.
    """
    _check_tol(tol)
    if _vanishes(v, p):
        return NormResult(0.0, (0.0, 0.0), diagnostics="zero functional", provenance="closed-form")
    cfg = cfg or QuadConfig()

    lower, upper = 0.0, math.inf

    def probe(log_mu: float) -> float:
        nonlocal lower, upper
        mu = math.exp(log_mu)
        rho, pairing = _profile(v, p, mu, cfg)
        if math.isfinite(rho):
            upper = min(upper, pairing - mu * (rho - 1.0))
            if rho <= 1.0:
                lower = max(lower, pairing)
        return rho

    # bisection runs on log mu; rho(x_mu) is non-increasing in mu
    log_lo, log_hi, step = None, 0.0, 1.0
    for _ in range(BRACKET_DOUBLINGS):
        if probe(log_hi) <= 1.0:
            break
        log_lo, log_hi = log_hi, log_hi + step
        step *= 2.0
    else:
        raise InconclusiveError("no multiplier makes the Lagrange profile feasible", reason="bracket")

    step = 1.0
    for _ in range(BRACKET_DOUBLINGS):
        if log_lo is not None:
            break
        candidate = log_hi - step
        if probe(candidate) > 1.0:
            log_lo = candidate
        else:
            log_hi = candidate
            step *= 2.0
    if log_lo is None:
        raise InconclusiveError("Lagrange profile stays feasible for every multiplier", reason="bracket")

    iterations = 0
    while upper - lower > tol * max(1.0, upper) and iterations < ORLICZ_ITERATIONS:
        mid = 0.5 * (log_lo + log_hi)
        if probe(mid) <= 1.0:
            log_hi = mid
        else:
            log_lo = mid
        iterations += 1

    if not math.isfinite(upper):
        raise InconclusiveError("Lagrangian upper bound never became finite", reason="bracket")
    diagnostics = ""
    if upper - lower > tol * max(1.0, upper):
        diagnostics = f"bracket width {upper - lower:.3g} after {iterations} iterations"
        logger.warning("orlicz norm bracket did not close: %s", diagnostics)
    return NormResult(0.5 * (lower + upper), (lower, upper), iterations, diagnostics, "quadrature")


def dual_luxemburg_norm(
    v: Func, p: Exponent, tol: float = NORM_TOL, cfg: QuadConfig | None = None
) -> NormResult:
    """‖v‖ in L^{p'(·)}."""
    return luxemburg_norm(v, dual_exponent(p), tol, cfg)


def holder_check(
    x: Func, v: Func, p: Exponent, tol: float = NORM_TOL, cfg: QuadConfig | None = None
) -> HolderCheck:
    """∫|x v| against 2 ‖x‖_{p(·)} ‖v‖_{p'(·)}."""
    product = integrate_abs_product(x, v, cfg)
    if not product.is_finite:
        raise PreconditionError(f"∫|x v| diverges: {product.divergence_witness}")
    rhs = 2.0 * luxemburg_norm(x, p, tol, cfg).value * dual_luxemburg_norm(v, p, tol, cfg).value
    ratio = product.value / rhs if rhs > 0 else 0.0
    return HolderCheck(product.value, rhs, ratio)


def regular_functional_norm(
    v: Func,
    p: Exponent,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> RegularFunctionalReport:
    """‖ξ_v‖ = ‖v‖⁰, checked against seeded x on the unit sphere of L^{p(·)}.

    ∫|v x| is tested rather than ξ_v(x) itself; sign-matching x keeps ρ(x).
    """
    orlicz = orlicz_norm(v, p, tol, cfg)
    rng = np.random.default_rng(seed)
    bound = orlicz.bracket[1] * (1.0 + 1e-6) + tol
    best, violations, details = 0.0, 0, []
    for k in range(samples):
        x = random_piecewise_linear(rng)
        norm = luxemburg_norm(x, p, tol, cfg).value
        pairing = integrate_abs_product(Scaled(x, 1.0 / norm), v, cfg)
        if not pairing.is_finite:
            raise PreconditionError(f"∫|x v| diverges on sample {k}")
        best = max(best, pairing.value)
        if pairing.value > bound:
            violations += 1
            details.append(f"sample {k}: {pairing.value:.9g} > {bound:.9g}")
    return RegularFunctionalReport(orlicz, samples, best, violations, details)
