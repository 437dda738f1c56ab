"""Quantitative checks that C([0,1]) sits closed and complemented against E in L^p(·).

Everything here is sampled or probed: dyadic interval norms for the closedness
constants, seeded continuous/simple pairs for separation, the direct sum, the
trivial extension of functionals on C and the sup-norm remark.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from config.settings import (
    CLOSEDNESS_FLOOR,
    CLOSEDNESS_STABILITY,
    DEFAULT_DEPTH,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DISTANCE_SCHEDULE,
    DISTANCE_TOL,
    MAX_LEVEL_N,
    NORM_TOL,
    REPLAY_TOL,
)
from core.errors import InconclusiveError, ParameterError, PreconditionError
from core.exponent_model import Exponent, MeasSet, exponent_infimum, level_set
from core.function_model import (
    Func,
    Indicator,
    Masked,
    Scaled,
    Sum,
    canonical,
    constant_func,
    eval_func,
    random_piecewise_linear,
    random_simple_on,
    sup_abs_difference,
    sup_norm_argmax,
    truncate_to_level,
)
from core.modular_kernel import QuadConfig, integrate_abs_product, integrate_product, modular_scaled
from core.norm_kernel import distance_to_E, luxemburg_norm, theta

logger = logging.getLogger(__name__)

DYADIC_CAVEAT = (
    "c is probed on dyadic intervals only; every interval contains a dyadic one "
    "of at least a quarter of its length"
)
EXTENSION_NOTE = "Hahn-Banach extension beyond C + E is non-constructive, out of scope"


class Verdict(str, Enum):
    CLOSED = "closed"
    NOT_CLOSED = "not_closed"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ClosednessReport:
    c_est: float
    C_est: float
    c1_est: float
    c2_est: float
    delta_est: float
    grid_depth: int
    verdict: Verdict
    depth_series: tuple[tuple[int, float], ...] = ()
    intervals_probed: int = 0
    dyadic_caveat: str = DYADIC_CAVEAT


@dataclass(frozen=True)
class SeparationReport:
    samples: int
    min_observed: float
    delta_bound: float
    violations: int
    replay_failures: int = 0
    replay_min_ratio: float = math.inf
    min_distance_to_bound: float = math.inf
    details: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class DirectSumReport:
    samples: int
    K_lower_ok: bool
    K_upper_ok: bool
    projection_bound: float
    failures: int = 0
    details: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ProximinalityReport:
    d_value: float
    witness: Func
    witness_level: float
    gap: float
    germ_ok: bool

    def passed(self, tol: float) -> bool:
        return -tol <= self.gap <= tol and self.germ_ok


@dataclass(frozen=True)
class FunctionalSpec:
    """ψ(x) = Σ a_i x(t_i) + ∫ density·x, a bounded functional on C([0,1])."""

    atoms: tuple[tuple[float, float], ...] = ()
    density: Func | None = None

    def __post_init__(self):
        for t, _ in self.atoms:
            if not 0.0 <= t <= 1.0:
                raise ParameterError(f"atom location {t} is outside [0, 1]")

    def cstar_norm(self, cfg: QuadConfig | None = None) -> float:
        """Total variation Σ|a_i| + ∫|density|."""
        total = math.fsum(abs(a) for _, a in self.atoms)
        if self.density is not None:
            total += integrate_abs_product(self.density, constant_func(1.0), cfg).value
        return total

    def apply(self, x: Func, cfg: QuadConfig | None = None) -> float:
        total = math.fsum(a * eval_func(x, t) for t, a in self.atoms)
        if self.density is not None:
            total += integrate_product(x, self.density, cfg).value
        return total


@dataclass(frozen=True)
class ExtensionReport:
    cstar_norm: float
    bound: float
    violations: int
    samples: int
    note: str = EXTENSION_NOTE


@dataclass(frozen=True)
class CountReport:
    """Sample count, violations and the extreme ratio observed."""

    samples: int
    violations: int
    max_ratio: float = 0.0
    details: list[str] = field(default_factory=list)


# ── Helpers ──────────────────────────────────────────────────

def _norm(f: Func, p: Exponent, tol: float, cfg: QuadConfig | None) -> float:
    return luxemburg_norm(f, p, tol, cfg).value


def _difference(x: Func, y: Func) -> Func:
    return Sum((x, Scaled(y, -1.0)))


def _sample_simple(rng: np.random.Generator, p: Exponent) -> tuple[Func, float]:
    """Bounded simple function supported on a seeded level set Omega_n, n <= MAX_LEVEL_N."""
    low = max(1, math.ceil(exponent_infimum(p)))
    n = float(rng.integers(low, MAX_LEVEL_N + 1))
    scale = 2.0 ** int(rng.integers(-3, 3))
    return random_simple_on(rng, level_set(p, n), scale=scale), n


def _require_closed(report: ClosednessReport):
    if report.verdict is not Verdict.CLOSED:
        raise PreconditionError(f"needs a closed verdict, got {report.verdict.value}")


def _min_abs_on(f: Func, a: float, b: float) -> float:
    """min |f| on [a, b] for piecewise-linear f (0 when f changes sign)."""
    lowest = math.inf
    for piece in canonical(f):
        lo, hi = max(a, piece.a), min(b, piece.b)
        if hi < lo:
            continue
        left, right = piece.value(lo), piece.value(hi)
        if left * right <= 0.0:
            return 0.0
        lowest = min(lowest, abs(left), abs(right))
    return lowest


# ── Closedness constants ─────────────────────────────────────

def _closedness_verdict(series: list[float]) -> Verdict:
    if len(series) < 3:
        return Verdict.INCONCLUSIVE
    first, middle, last = series[-3:]
    drift = abs(last - first) / first if first > 0 else math.inf
    if drift < CLOSEDNESS_STABILITY and last >= CLOSEDNESS_FLOOR:
        return Verdict.CLOSED
    shrink = 1.0 - CLOSEDNESS_STABILITY
    if middle <= shrink * first and last <= shrink * middle:
        return Verdict.NOT_CLOSED
    return Verdict.INCONCLUSIVE


def closedness_constants(
    p: Exponent,
    grid_depth: int = DEFAULT_DEPTH,
    sample_count: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> ClosednessReport:
    """Estimate c, C (indicator norms) and c1, c2 (‖x‖ against ‖x‖_C) for p.

    Verdict: closed when the per-depth minimum of ‖χ_I‖ drifts less than the
    stability band over the last two depth steps and stays above the floor;
    not_closed when each of those steps shrinks it by at least the band.
    """
    if grid_depth < 3:
        raise ParameterError(f"grid depth must be >= 3, got {grid_depth}")
    if sample_count < 1:
        raise ParameterError(f"need at least one sampled function, got {sample_count}")

    series, upper, probed = [], 0.0, 0
    for depth in range(grid_depth + 1):
        width = 2.0**-depth
        norms = []
        for k in range(2**depth):
            interval = Indicator(MeasSet(((k * width, (k + 1) * width),)))
            norms.append(_norm(interval, p, tol, cfg))
        probed += len(norms)
        series.append(min(norms))
        upper = max(upper, max(norms))
        logger.debug("closedness depth %d: min %.9g max %.9g", depth, min(norms), max(norms))

    rng = np.random.default_rng(seed)
    sampled = [_norm(random_piecewise_linear(rng), p, tol, cfg) for _ in range(sample_count)]
    c1 = min(sampled) if sampled else math.nan
    c2 = max(sampled) if sampled else math.nan

    c_est = min(series)
    verdict = _closedness_verdict(series)
    logger.info("closedness: c=%.6g C=%.6g c1=%.6g c2=%.6g verdict=%s", c_est, upper, c1, c2, verdict.value)
    return ClosednessReport(
        c_est=c_est,
        C_est=upper,
        c1_est=c1,
        c2_est=c2,
        delta_est=c_est / (2.0 * c2),
        grid_depth=grid_depth,
        verdict=verdict,
        depth_series=tuple(enumerate(series)),
        intervals_probed=probed,
    )


# ── Separation and the proof replay ──────────────────────────

def _replay(x: Func, p: Exponent, n: float, tol: float, cfg: QuadConfig | None) -> float | None:
    """Ratio ‖x χ_O‖ / (½ |x(t0)| ‖χ_O‖) on the neighbourhood O of the argmax t0.

    O = (t0 − ε, t0 + ε) with ε the largest dyadic-bisected radius such that
    ‖x^(n) χ_O‖ <= REPLAY_TOL and |x| >= ½ |x(t0)| on O. None if no radius works.
    """
    peak = sup_norm_argmax(x)
    truncated = truncate_to_level(x, p, n)

    def admissible(eps: float) -> bool:
        a, b = max(0.0, peak.t0 - eps), min(1.0, peak.t0 + eps)
        if _min_abs_on(x, a, b) < 0.5 * peak.value:
            return False
        window = Masked(truncated, MeasSet(((a, b),)))
        result = modular_scaled(window, p, REPLAY_TOL, cfg)
        return result.is_finite and result.value <= 1.0

    lo, hi = 0.0, 1.0
    if admissible(hi):
        lo = hi
    else:
        eps = 0.5
        while not admissible(eps):
            hi, eps = eps, 0.5 * eps
            if eps < 2.0**-50:
                return None
        lo = eps
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid

    a, b = max(0.0, peak.t0 - lo), min(1.0, peak.t0 + lo)
    region = MeasSet(((a, b),))
    lhs = _norm(Masked(x, region), p, tol, cfg)
    rhs = 0.5 * peak.value * _norm(Indicator(region), p, tol, cfg)
    return lhs / rhs if rhs > 0 else math.inf


def separation_delta(
    p: Exponent,
    report: ClosednessReport,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> SeparationReport:
    """Check ‖x − y‖ >= delta for unit continuous x and simple y supported on Omega_n."""
    _require_closed(report)
    rng = np.random.default_rng(seed)
    delta = report.delta_est
    observed, violations, replay_failures, replay_min = math.inf, 0, 0, math.inf
    details = []

    for k in range(samples):
        x0 = random_piecewise_linear(rng)
        x = Scaled(x0, 1.0 / _norm(x0, p, tol, cfg))
        y, n = _sample_simple(rng, p)
        distance = _norm(_difference(x, y), p, tol, cfg)
        observed = min(observed, distance)
        if distance < delta - tol:
            violations += 1
            details.append(f"sample {k}: ‖x − y‖ = {distance:.9g} < {delta:.9g} (n = {n:g})")

        ratio = _replay(x, p, n, tol, cfg)
        if ratio is None or ratio < 1.0 - 1e-6:
            replay_failures += 1
            details.append(f"sample {k}: proof replay ratio {ratio}")
        elif ratio < replay_min:
            replay_min = ratio

    logger.info("separation: %d samples, min %.6g vs delta %.6g, %d violations",
                samples, observed, delta, violations)
    return SeparationReport(
        samples=samples,
        min_observed=observed,
        delta_bound=delta,
        violations=violations,
        replay_failures=replay_failures,
        replay_min_ratio=replay_min,
        min_distance_to_bound=observed - delta,
        details=details,
    )


def direct_sum_check(
    p: Exponent,
    delta: float,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> DirectSumReport:
    """‖x + y‖ against max(‖x‖, ‖y‖) on both sides of the direct sum C + E."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    rng = np.random.default_rng(seed)
    lower_ok = upper_ok = True
    failures, details = 0, []
    for k in range(samples):
        x = Scaled(random_piecewise_linear(rng), 2.0 ** int(rng.integers(-2, 3)))
        y, _ = _sample_simple(rng, p)
        nx, ny = _norm(x, p, tol, cfg), _norm(y, p, tol, cfg)
        total = _norm(Sum((x, y)), p, tol, cfg)
        big = max(nx, ny)
        if total > 2.0 * big + tol:
            lower_ok = False
            failures += 1
            details.append(f"sample {k}: ‖x + y‖ = {total:.9g} > 2 max = {2 * big:.9g}")
        if big > (1.0 + 1.0 / delta) * total + tol:
            upper_ok = False
            failures += 1
            details.append(f"sample {k}: max = {big:.9g} > (1 + 1/δ) ‖x + y‖")
    return DirectSumReport(samples, lower_ok, upper_ok, 1.0 / delta, failures, details)


def proximinality_check(
    f: Func,
    p: Exponent,
    tol: float = DISTANCE_TOL,
    schedule=DISTANCE_SCHEDULE,
    cfg: QuadConfig | None = None,
) -> ProximinalityReport:
    """Best truncation along the distance schedule, against the limit and θ."""
    trace = distance_to_E(f, p, schedule, tol, cfg)
    if not trace.converged:
        raise InconclusiveError("distance trace did not settle", reason="schedule")
    best = min(range(len(trace.values)), key=lambda i: (trace.values[i], i))
    level = trace.levels[best]
    witness_norm = trace.values[best]
    germ = theta(f, p, cfg=cfg).value
    return ProximinalityReport(
        d_value=trace.limit_estimate,
        witness=truncate_to_level(f, p, level),
        witness_level=level,
        gap=witness_norm - trace.limit_estimate,
        germ_ok=witness_norm >= germ - tol,
    )


def extension_bound(
    psi: FunctionalSpec,
    p: Exponent,
    report: ClosednessReport,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> ExtensionReport:
    """Norm bound of the trivial extension ψ∘P on C + E, checked on seeded pairs."""
    _require_closed(report)
    cstar = psi.cstar_norm(cfg)
    bound = cstar / (report.c1_est * report.delta_est)
    rng = np.random.default_rng(seed)
    violations = 0
    for k in range(samples):
        x = Scaled(random_piecewise_linear(rng), 2.0 ** int(rng.integers(-2, 3)))
        y, _ = _sample_simple(rng, p)
        value = abs(psi.apply(x, cfg))
        total = _norm(Sum((x, y)), p, tol, cfg)
        if value > bound * total + tol:
            violations += 1
            logger.warning("extension sample %d: |ψ(x)| = %.9g > %.9g", k, value, bound * total)
    return ExtensionReport(cstar, bound, violations, samples)


def linfty_separation_check(
    p: Exponent,
    delta: float,
    c1: float,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> CountReport:
    """‖x − y‖_∞ >= ‖x − y‖_{p(·)} and ‖x − y‖_∞ >= delta·c1 for unit-sup x."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if not c1 > 0:
        raise ParameterError(f"c1 must be positive, got {c1}")
    rng = np.random.default_rng(seed)
    violations, worst, details = 0, 0.0, []
    for k in range(samples):
        x = random_piecewise_linear(rng)
        y, _ = _sample_simple(rng, p)
        diff = _difference(x, y)
        sup = sup_abs_difference(x, y)
        norm = _norm(diff, p, tol, cfg)
        worst = max(worst, norm / sup if sup > 0 else 0.0)
        if sup < norm - tol * max(1.0, norm) or sup < delta * c1 - tol:
            violations += 1
            details.append(f"sample {k}: sup {sup:.9g}, norm {norm:.9g}")
    return CountReport(samples, violations, worst, details)


def lattice_bound_check(
    p: Exponent,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    tol: float = NORM_TOL,
    cfg: QuadConfig | None = None,
) -> CountReport:
    """‖z‖_{p(·)} <= ‖z‖_∞ on seeded continuous and simple z."""
    rng = np.random.default_rng(seed)
    violations, worst, details = 0, 0.0, []
    for k in range(samples):
        if k % 2:
            z, _ = _sample_simple(rng, p)
        else:
            z = Scaled(random_piecewise_linear(rng), 2.0 ** int(rng.integers(-3, 4)))
        sup = sup_norm_argmax(z).value
        norm = _norm(z, p, tol, cfg)
        worst = max(worst, norm / sup if sup > 0 else 0.0)
        if norm > sup + tol * max(1.0, sup):
            violations += 1
            details.append(f"sample {k}: ‖z‖ = {norm:.12g} > sup {sup:.12g}")
    return CountReport(samples, violations, worst, details)
