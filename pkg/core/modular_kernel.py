"""Modular ρ_p(x) = ∫₀¹ |x(t)|^p(t) dt with error bounds and divergence detection.

Each exponent variant has its own evaluation strategy:
- constant and piecewise-constant exponents: moments ∫|g|^q over every
  (function piece, exponent piece) pair, built once per function and rescaled
  for every λ, since |g/λ|^q = λ^-q |g|^q;
- the log exponent: u = ln(1/t) coordinates, closed forms on constant pieces,
  graded rungs toward t = 0 otherwise;
- spiked exponents: per-level moments plus geometric germ tails at the points
  where the spike levels accumulate.

Masks by level sets of the exponent being integrated are peeled off and turned
into windows on the exponent value, so truncations stay exact where the float
endpoints of the level set underflow.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from config.settings import (
    DUAL_CLIP,
    GERM_SPAN,
    LOG_BOUNDED_SPAN,
    PLAN_CACHE,
    QUAD_ABS_TOL,
    QUAD_DIVERGENCE_CAP,
    QUAD_ENDPOINT_GRADING,
    QUAD_MAX_SUBDIVISIONS,
    QUAD_REL_TOL,
    SPIKE_DENSE_LEVELS,
    SPIKE_EXPLICIT_LEVELS,
    SPIKE_QUAD_LEVELS,
)
from core.errors import (
    ParameterError,
    QuadratureOverflowError,
    UnboundedFunctionError,
    UnsupportedVariantError,
)
from core.exponent_model import (
    ConstantExponent,
    DualExponent,
    Exponent,
    LevelSet,
    LogExponent,
    PiecewiseExponent,
    SpikedExponent,
    levels_at_most,
    spike_level_measures,
)
from core.function_model import Func, Masked, Piece, Scaled, canonical, piece_sup_abs
from core.quadrature import (
    Accumulator,
    Divergence,
    adaptive,
    ladder,
    poly_values,
    u_measure,
)

logger = logging.getLogger(__name__)

LOG_OVERFLOW = 709.0
LN2 = math.log(2.0)


# ── Types ────────────────────────────────────────────────────

@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = QUAD_ABS_TOL
    rel_tol: float = QUAD_REL_TOL
    max_subdivisions: int = QUAD_MAX_SUBDIVISIONS
    divergence_cap: float = QUAD_DIVERGENCE_CAP
    endpoint_grading: float = QUAD_ENDPOINT_GRADING
    closed_forms: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if not self.divergence_cap > 1:
            raise ParameterError("divergence cap must exceed 1")
        if not 0 < self.endpoint_grading < 1:
            raise ParameterError("endpoint grading must lie in (0, 1)")
        if self.max_subdivisions < 1:
            raise ParameterError("subdivision budget must be positive")

    @property
    def rung_width(self) -> float:
        """Width of one graded rung in u = ln(1/t)."""
        return -math.log(self.endpoint_grading)


class ModularStatus(str, Enum):
    FINITE = "Finite"
    DIVERGENT = "Divergent"


@dataclass(frozen=True)
class ModularResult:
    status: ModularStatus
    value: float = 0.0
    error_bound: float = 0.0
    divergence_witness: str = ""
    witness_region: tuple[float, float] | None = None
    provenance: str = "closed-form"
    subdivisions: int = 0

    @property
    def is_finite(self) -> bool:
        return self.status is ModularStatus.FINITE


# ── Integrands ───────────────────────────────────────────────

def _conjugate(q, clip: float):
    q = np.maximum(np.asarray(q, dtype=float), 1.0 + clip)
    return q / (q - 1.0)


@dataclass(frozen=True)
class PowerIntegrand:
    """|c·g|^q, or |c·g|^q' with q' the clipped conjugate of q."""

    dual: bool = False
    clip: float = DUAL_CLIP

    @property
    def kind(self) -> tuple[str, float]:
        return ("dual", self.clip) if self.dual else ("primal", 0.0)

    @property
    def geometric(self) -> bool:
        return not self.dual

    def power(self, q):
        return _conjugate(q, self.clip) if self.dual else np.asarray(q, dtype=float)

    def offset(self, q, log_c: float):
        return self.power(q) * log_c


@dataclass(frozen=True)
class ProfileIntegrand:
    """Parts of the Lagrange profile x_mu = (|v| / (mu p))^(1/(p-1)).

    pairing=False integrates |x_mu|^p, pairing=True integrates |v|·|x_mu|.
    """

    mu: float
    pairing: bool = False
    clip: float = DUAL_CLIP

    geometric = False

    @property
    def kind(self) -> tuple[str, float]:
        return ("dual", self.clip)

    def power(self, q):
        return _conjugate(q, self.clip)

    def offset(self, q, log_c: float):
        q = np.maximum(np.asarray(q, dtype=float), 1.0 + self.clip)
        log_mq = math.log(self.mu) + np.log(q)
        if self.pairing:
            return self.power(q) * log_c - log_mq / (q - 1.0)
        return self.power(q) * (log_c - log_mq)


def _power_function(kind: tuple[str, float]):
    name, clip = kind
    if name == "dual":
        return lambda q: float(_conjugate(q, clip))
    return float


# ── Shared helpers ───────────────────────────────────────────

def peel_masks(f: Func, p: Exponent):
    """Strip scalings and level-set masks of p; returns (factor, inner, window)."""
    factor, lo, hi = 1.0, -math.inf, math.inf
    while True:
        if isinstance(f, Scaled):
            factor *= float(f.factor)
            f = f.inner
        elif isinstance(f, Masked) and isinstance(f.mask, LevelSet) and f.mask.exponent == p:
            w_lo, w_hi = f.mask.window
            lo, hi = max(lo, w_lo), min(hi, w_hi)
            f = f.inner
        else:
            return factor, f, (lo, hi)


def _log_sum(log_terms) -> float:
    log_terms = np.asarray(log_terms, dtype=float)
    if np.any(log_terms > LOG_OVERFLOW):
        raise QuadratureOverflowError("modular exceeds the float range")
    return math.fsum(np.exp(log_terms).tolist())


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _normalized_power(t, payload):
    g = poly_values(payload["coeffs"], t)
    with np.errstate(divide="ignore"):
        log_g = np.log(np.abs(g)) - payload["log_scale"][:, None]
    return np.exp(payload["power"][:, None] * log_g)


def _analytic_normalized_power(piece: Piece):
    def integrand(t, payload):
        with np.errstate(divide="ignore"):
            log_g = np.log(np.abs(piece.values(t))) - payload["log_scale"][:, None]
        return np.exp(payload["power"][:, None] * log_g)

    return integrand


class _CellBatch:
    """Cells gathered across pieces, integrated in one adaptive pass per kind."""

    def __init__(self):
        self.poly: list[tuple] = []
        self.analytic: list[tuple] = []

    def add(self, piece: Piece, lo, hi, power: float, log_scale: float, group: int):
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        if lo.size == 0:
            return
        if piece.is_polynomial():
            coeffs = np.tile(np.array(piece.coeffs), (lo.size, 1))
            self.add_polynomial_cells(coeffs, lo, hi, power, np.full(lo.size, log_scale), group)
        else:
            self.analytic.append((piece, lo, hi, power, log_scale, group))

    def add_polynomial_cells(self, coeffs, lo, hi, power: float, log_scale, group: int):
        """Cells with their own coefficient rows and log scales."""
        if lo.size:
            self.poly.append((coeffs, lo, hi, np.full(lo.size, power), log_scale, np.full(lo.size, group)))

    def integrate(self, acc: Accumulator, groups: int):
        """Log-moments summed per group: (log_values, log_errors) arrays."""
        log_values = np.full(groups, -np.inf)
        log_errors = np.full(groups, -np.inf)

        def fold(values, errors, power, log_scale, group):
            np.logaddexp.at(log_values, group, _safe_log(values) + power * log_scale)
            np.logaddexp.at(log_errors, group, _safe_log(errors) + power * log_scale)

        if self.poly:
            coeffs, lo, hi, power, log_scale, group = (
                np.concatenate(column) for column in zip(*self.poly)
            )
            payload = {"coeffs": coeffs, "power": power, "log_scale": log_scale}
            values, errors = adaptive(_normalized_power, lo, hi, acc, payload)
            fold(values, errors, power, log_scale, group)

        for piece, lo, hi, power, log_scale, group in self.analytic:
            payload = {"power": np.full(lo.size, power), "log_scale": np.full(lo.size, log_scale)}
            values, errors = adaptive(_analytic_normalized_power(piece), lo, hi, acc, payload)
            fold(values, errors, power, log_scale, np.full(lo.size, group))

        return log_values, log_errors


def _t_ladder(func, b: float, acc: Accumulator, witness: str):
    """∫_0^b func(t) dt on rungs [b w^(k+1), b w^k) toward t = 0."""
    w = acc.cfg.endpoint_grading

    def rungs(start, count):
        k = np.arange(start, start + count, dtype=float)
        return adaptive(lambda t, _: func(t), b * w ** (k + 1), b * w**k, acc)

    return ladder(rungs, acc, witness, (0.0, b))


def _unbounded_moment(piece: Piece, power: float, b: float, acc: Accumulator):
    """log ∫_0^b |g|^power for a piece unbounded at t = 0."""
    scale = abs(piece.value(b)) or 1.0
    log_scale = math.log(scale)

    def func(t):
        with np.errstate(divide="ignore"):
            return np.exp(power * (np.log(np.abs(piece.values(t))) - log_scale))

    witness = f"|x|^{power:.6g} is not integrable at t = 0"
    value, error = _t_ladder(func, b, acc, witness)
    return float(_safe_log(value)) + power * log_scale, float(_safe_log(error)) + power * log_scale


# ── Constant and piecewise-constant exponents ───────────────

@dataclass(frozen=True)
class _GroupPlan:
    exponents: tuple[float, ...]
    log_moments: tuple[float, ...]
    log_errors: tuple[float, ...]
    closed_form: bool
    subdivisions: int

    def evaluate(self, integrand, log_c: float) -> tuple[float, float]:
        if not self.exponents:
            return 0.0, 0.0
        offsets = integrand.offset(np.array(self.exponents), log_c)
        value = _log_sum(np.array(self.log_moments) + offsets)
        error = _log_sum(np.array(self.log_errors) + offsets)
        return value, error


def _exponent_segments(p: Exponent):
    if isinstance(p, ConstantExponent):
        return [(0.0, 1.0, p.value)]
    return list(zip(p.breaks, p.breaks[1:], p.values))


@lru_cache(maxsize=PLAN_CACHE)
def _piecewise_plan(inner: Func, p: Exponent, window, kind, cfg: QuadConfig) -> _GroupPlan:
    acc = Accumulator(cfg)
    lo, hi = window
    power_of = _power_function(kind)
    segments = [(a, b, q) for a, b, q in _exponent_segments(p) if lo < q <= hi]
    exponents = sorted({q for _, _, q in segments})
    index = {q: i for i, q in enumerate(exponents)}
    exact_values = np.full(len(exponents), -np.inf)
    exact_errors = np.full(len(exponents), -np.inf)
    batch = _CellBatch()

    for a0, b0, q in segments:
        power = power_of(q)
        group = index[q]
        for piece in canonical(inner):
            a, b = max(a0, piece.a), min(b0, piece.b)
            if b <= a or piece.is_zero():
                continue
            if piece.is_constant() and cfg.closed_forms:
                log_moment = power * math.log(abs(piece.coeffs[0])) + math.log(b - a)
                exact_values[group] = np.logaddexp(exact_values[group], log_moment)
            elif piece.unbounded_at_zero() and a == 0.0:
                if kind[0] != "primal":
                    raise UnboundedFunctionError("bounded function required for this integral")
                log_moment, log_error = _unbounded_moment(piece, power, b, acc)
                exact_values[group] = np.logaddexp(exact_values[group], log_moment)
                exact_errors[group] = np.logaddexp(exact_errors[group], log_error)
            else:
                scale = piece_sup_abs(piece, a, b)
                if scale > 0.0:
                    batch.add(piece, a, b, power, math.log(scale), group)

    log_values, log_errors = batch.integrate(acc, len(exponents))
    return _GroupPlan(
        exponents=tuple(exponents),
        log_moments=tuple(np.logaddexp(log_values, exact_values).tolist()),
        log_errors=tuple(np.logaddexp(log_errors, exact_errors).tolist()),
        closed_form=not acc.quadrature,
        subdivisions=acc.subdivisions,
    )


# ── Spiked exponents ─────────────────────────────────────────

def _level_window(p: SpikedExponent, window) -> tuple[int, float]:
    lo, hi = window
    j_lo = 1 if lo == -math.inf else levels_at_most(p, lo) + 1
    j_hi = math.inf if hi == math.inf else levels_at_most(p, hi)
    return j_lo, j_hi


def _level_cells(p: SpikedExponent, j: int, a, b):
    """Level-j pieces of every period met by [a_i, b_i); returns (lo, hi, owner)."""
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    period = p.period
    first = np.floor(a / period)
    counts = (np.ceil(b / period) - first).astype(int)
    owner = np.repeat(np.arange(a.size), counts)
    offsets = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    ks = first[owner] + offsets
    if p.mirrored:
        rel_lo, rel_hi = 2.0**-j, 2.0 ** (1 - j)
    else:
        rel_lo, rel_hi = 1.0 - 2.0 ** (1 - j), 1.0 - 2.0**-j
    lo = np.maximum((ks + rel_lo) * period, a[owner])
    hi = np.minimum((ks + rel_hi) * period, b[owner])
    keep = hi > lo
    return lo[keep], hi[keep], owner[keep]


def _geometric(m: int, n_terms: float, log_r: float) -> float:
    """sum_{j=m}^{m+n_terms-1} r^j; n_terms may be inf (caller checks r < 1)."""
    if log_r == -math.inf:
        return 0.0
    if math.isinf(n_terms):
        return math.exp(m * log_r) / -math.expm1(log_r)
    if log_r == 0.0:
        return float(n_terms)
    if log_r < 0.0:
        return math.exp(m * log_r) * -math.expm1(n_terms * log_r) / -math.expm1(log_r)
    log_total = (m + n_terms) * log_r + math.log(-math.expm1(-n_terms * log_r)) - math.log(math.expm1(log_r))
    if log_total > LOG_OVERFLOW:
        raise QuadratureOverflowError("spike level series exceeds the float range")
    return math.exp(log_total)


def _spike_series(p: SpikedExponent, start: int, stop: float, log_y: float, where: float) -> float:
    """sum_{j=start}^{stop} 2^-j y^max(base, slope j) in closed form."""
    if log_y == -math.inf:
        return 0.0
    sloped = max(start, p.first_sloped_level())
    log_r = p.slope * log_y - LN2
    if math.isinf(stop) and log_r >= 0.0:
        raise Divergence(
            f"spike levels accumulating at t = {where:.6g}: ratio y^s/2 = e^{log_r:.6g} >= 1",
            (where, where),
        )
    flat = [-j * LN2 + p.base * log_y for j in range(start, int(min(sloped, stop + 1)))]
    total = _log_sum(flat) if flat else 0.0
    if stop < sloped:
        return total
    return total + _geometric(sloped, stop - sloped + 1, log_r)


def _explicit_series(p, integrand, log_c: float, start: int, stop: float, log_y: float) -> float:
    last = int(min(stop, SPIKE_EXPLICIT_LEVELS))
    if last < start or log_y == -math.inf:
        return 0.0
    js = np.arange(start, last + 1, dtype=float)
    q = np.maximum(p.base, p.slope * js)
    terms = -js * LN2 + integrand.power(q) * log_y + integrand.offset(q, log_c)
    total = _log_sum(terms)
    if stop > last:
        j = last + 1.0
        q = max(p.base, p.slope * j)
        total += 2.0 * math.exp(
            min(-j * LN2 + float(integrand.power(q)) * log_y + float(integrand.offset(q, log_c)), LOG_OVERFLOW)
        )
    return total


@dataclass(frozen=True)
class _SpikePlan:
    exponent: SpikedExponent
    j_hi: float
    log_dense: tuple[float, ...]
    log_dense_errors: tuple[float, ...]
    series: tuple[tuple[float, int, float, float, float], ...]
    closed_form: bool
    subdivisions: int

    def evaluate(self, integrand, log_c: float) -> tuple[float, float]:
        p = self.exponent
        parts, spreads = [], []
        # series first: divergence must be decided before any overflow
        for log_weight, start, log_y, log_y_hi, where in self.series:
            weight = math.exp(log_weight)
            if integrand.geometric:
                s = _spike_series(p, start, self.j_hi, log_y + log_c, where)
                try:
                    s_hi = _spike_series(p, start, self.j_hi, log_y_hi + log_c, where)
                except Divergence:
                    s_hi = 2.0 * s
            else:
                s = _explicit_series(p, integrand, log_c, start, self.j_hi, log_y)
                s_hi = _explicit_series(p, integrand, log_c, start, self.j_hi, log_y_hi)
            parts.append(weight * s)
            spreads.append(weight * abs(s_hi - s))

        js = np.arange(1, len(self.log_dense) + 1, dtype=float)
        offsets = integrand.offset(np.maximum(p.base, p.slope * js), log_c)
        parts.append(_log_sum(np.array(self.log_dense) + offsets))
        spreads.append(_log_sum(np.array(self.log_dense_errors) + offsets))
        return math.fsum(parts), math.fsum(spreads)


def _constant_piece_levels(p, piece, power_of, j_lo, j_hi, log_dense, series):
    log_g = math.log(abs(piece.coeffs[0]))
    measures = spike_level_measures(p, piece.a, piece.b)
    for j, m in sorted(measures.dense.items()):
        if j_lo <= j <= j_hi and j <= SPIKE_DENSE_LEVELS and m > 0.0:
            term = math.log(m) + power_of(p.level_value(j)) * log_g
            log_dense[j - 1] = np.logaddexp(log_dense[j - 1], term)
    where = piece.a if p.mirrored else piece.b
    for weight, first in measures.tails:
        start = max(first, j_lo)
        if start <= j_hi:
            series.append((math.log(weight), start, log_g, log_g, where))


def _germ_entries(p, piece, a, b, start):
    """One geometric tail per accumulation point inside [a, b]."""
    period = p.period
    h = 2.0**-SPIKE_QUAD_LEVELS * period
    anchors = p.anchors()
    if p.mirrored:
        anchors = anchors[(anchors >= a) & (b - anchors >= h)]
        inner = anchors + h
    else:
        anchors = anchors[(anchors > a) & (anchors <= b) & (anchors - a >= h)]
        inner = anchors - h
    if anchors.size == 0:
        return []
    at = piece.values(anchors)
    near = piece.values(inner)
    y = np.abs(at)
    y_hi = y + 2.0 * np.abs(at - near)
    log_y, log_y_hi = _safe_log(y), _safe_log(y_hi)
    log_weight = math.log(period)
    return [
        (log_weight, start, float(ly), float(lh), float(t))
        for ly, lh, t in zip(log_y, log_y_hi, anchors)
        if lh > -math.inf
    ]


@lru_cache(maxsize=PLAN_CACHE)
def _spike_plan(inner: Func, p: SpikedExponent, window, kind, cfg: QuadConfig) -> _SpikePlan:
    acc = Accumulator(cfg)
    power_of = _power_function(kind)
    j_lo, j_hi = _level_window(p, window)
    log_dense = np.full(SPIKE_DENSE_LEVELS, -np.inf)
    log_dense_errors = np.full(SPIKE_DENSE_LEVELS, -np.inf)
    series: list[tuple] = []
    batch = _CellBatch()
    polynomial: list[tuple[Piece, float, float, float]] = []
    quad_levels = range(j_lo, int(min(j_hi, SPIKE_QUAD_LEVELS)) + 1)

    for piece in canonical(inner) if j_lo <= j_hi else ():
        if piece.is_zero():
            continue
        if piece.is_constant():
            _constant_piece_levels(p, piece, power_of, j_lo, j_hi, log_dense, series)
            continue

        a, b = piece.a, piece.b
        if piece.unbounded_at_zero():
            if kind[0] != "primal":
                raise UnboundedFunctionError("bounded function required for this integral")
            if p.mirrored:
                raise UnsupportedVariantError(
                    "unbounded function where the spike levels also accumulate at t = 0"
                )
            head = min(b, 0.5 * p.period)
            if j_lo <= 1 <= j_hi:
                log_m, log_e = _unbounded_moment(piece, power_of(p.level_value(1)), head, acc)
                log_dense[0] = np.logaddexp(log_dense[0], log_m)
                log_dense_errors[0] = np.logaddexp(log_dense_errors[0], log_e)
            if head >= b:
                continue
            a = head

        scale = piece_sup_abs(piece, a, b)
        if scale == 0.0:
            continue
        if piece.is_polynomial():
            polynomial.append((piece, a, b, math.log(scale)))
        else:
            for j in quad_levels:
                lo, hi, _ = _level_cells(p, j, a, b)
                batch.add(piece, lo, hi, power_of(p.level_value(j)), math.log(scale), j - 1)
        start = max(j_lo, SPIKE_QUAD_LEVELS + 1)
        if start <= j_hi:
            series.extend(_germ_entries(p, piece, a, b, start))

    if polynomial:
        coeffs = np.array([entry[0].coeffs for entry in polynomial])
        starts = np.array([entry[1] for entry in polynomial])
        stops = np.array([entry[2] for entry in polynomial])
        log_scales = np.array([entry[3] for entry in polynomial])
        for j in quad_levels:
            lo, hi, owner = _level_cells(p, j, starts, stops)
            batch.add_polynomial_cells(
                coeffs[owner], lo, hi, power_of(p.level_value(j)), log_scales[owner], j - 1
            )

    log_values, log_errors = batch.integrate(acc, SPIKE_DENSE_LEVELS)
    return _SpikePlan(
        exponent=p,
        j_hi=j_hi,
        log_dense=tuple(np.logaddexp(log_dense, log_values).tolist()),
        log_dense_errors=tuple(np.logaddexp(log_dense_errors, log_errors).tolist()),
        series=tuple(series),
        closed_form=not acc.quadrature,
        subdivisions=acc.subdivisions,
    )


# ── Log exponent ─────────────────────────────────────────────

def _log_expm1_ratio(kappa: float, span: float) -> float:
    """log((e^(kappa span) - 1) / kappa)."""
    if kappa == 0.0:
        return math.log(span)
    if kappa > 0.0:
        return kappa * span + math.log(-math.expm1(-kappa * span)) - math.log(kappa)
    return math.log(-math.expm1(kappa * span)) - math.log(-kappa)


def _log_closed_form(log_c: float, u1: float, u2: float) -> float:
    """∫_{u1}^{u2} C^(1+u) e^(-u) du, C = exp(log_c)."""
    if log_c == -math.inf or u2 <= u1:
        return 0.0
    kappa = log_c - 1.0
    if math.isinf(u2):
        if kappa >= 0.0:
            raise Divergence(
                f"neighbourhood of t = 0 where |x|^p(t) ~ C e^(u(ln C - 1)), C = {math.exp(log_c):.6g} >= e",
                (0.0, math.exp(-u1)),
            )
        log_value = log_c + kappa * u1 - math.log(-kappa)
    else:
        log_value = log_c + kappa * u1 + _log_expm1_ratio(kappa, u2 - u1)
    if log_value > LOG_OVERFLOW:
        raise QuadratureOverflowError("log-exponent modular exceeds the float range")
    return math.exp(log_value)


def _log_germ(piece: Piece, u: float, u2: float, log_c: float):
    """Tail ∫_u^u2 with g frozen at its germ g(0) = c0, bracketed by |g - c0| <= L e^-u."""
    c0 = abs(piece.coeffs[0])
    spread = sum(abs(c) for c in piece.coeffs[1:]) * math.exp(-u)
    value = _log_closed_form(float(_safe_log(c0)) + log_c, u, u2) if c0 > 0.0 else 0.0
    try:
        upper = _log_closed_form(math.log(c0 + spread) + log_c, u, u2) if c0 + spread > 0 else 0.0
    except Divergence:
        upper = 2.0 * value
    lower = _log_closed_form(math.log(c0 - spread) + log_c, u, u2) if c0 > spread else 0.0
    return value, max(upper - value, value - lower)


def _u_integrand(integrand, log_c: float, piece: Piece | None = None):
    def values(u, payload):
        if piece is None:
            g = poly_values(payload["coeffs"], np.exp(-u))
        else:
            g = piece.values_in_u(u)
        q = 1.0 + u
        with np.errstate(divide="ignore"):
            log_g = np.log(np.abs(g))
        return np.exp(integrand.power(q) * log_g + integrand.offset(q, log_c) - u)

    return values


def _u_cells(piece, lo, hi, integrand, log_c, acc):
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    if piece.is_polynomial():
        payload = {"coeffs": np.tile(np.array(piece.coeffs), (lo.size, 1))}
        return adaptive(_u_integrand(integrand, log_c), lo, hi, acc, payload, measure=u_measure)
    return adaptive(_u_integrand(integrand, log_c, piece), lo, hi, acc, measure=u_measure)


def _log_ladder(piece: Piece, u1: float, u2: float, integrand, log_c: float, acc: Accumulator):
    cfg = acc.cfg
    w = cfg.rung_width
    total = None if math.isinf(u2) else math.ceil((u2 - u1) / w)

    def rungs(start, count):
        k = np.arange(start, start + count, dtype=float)
        return _u_cells(piece, u1 + k * w, np.minimum(u1 + (k + 1) * w, u2), integrand, log_c, acc)

    germ_at, germ = None, None
    if piece.is_polynomial() and cfg.closed_forms:
        germ_at = math.ceil(GERM_SPAN / w)

        def germ(k):
            return _log_germ(piece, u1 + k * w, u2, log_c)

    region = (0.0 if math.isinf(u2) else math.exp(-u2), math.exp(-u1))
    witness = "neighbourhood of t = 0: graded rungs in u = ln(1/t) keep growing"
    return ladder(rungs, acc, witness, region, total=total, germ_at=germ_at, germ=germ)


@lru_cache(maxsize=8)
def _graded_grid(grading: float, clip: float) -> tuple[float, ...]:
    points = {0.0, clip}
    x = 1.0
    while x > clip:
        points.add(x)
        x *= grading
    points.update(float(k) for k in range(1, int(LOG_BOUNDED_SPAN) + 1))
    return tuple(sorted(points))


def _log_integral(inner: Func, window, integrand, log_c: float, cfg: QuadConfig):
    acc = Accumulator(cfg)
    lo, hi = window
    u_lo = 0.0 if lo == -math.inf else max(0.0, lo - 1.0)
    u_hi = math.inf if hi == math.inf else hi - 1.0
    values, errors = [], []
    w = cfg.rung_width

    for piece in canonical(inner):
        if piece.is_zero():
            continue
        u1 = max(-math.log(piece.b), u_lo, 0.0)
        u2 = min(math.inf if piece.a == 0.0 else -math.log(piece.a), u_hi)
        if u2 <= u1:
            continue

        if not integrand.geometric:
            if piece.unbounded_at_zero():
                raise UnboundedFunctionError("bounded function required for this integral")
            grid = np.array(_graded_grid(cfg.endpoint_grading, getattr(integrand, "clip", DUAL_CLIP)))
            end = min(u2, LOG_BOUNDED_SPAN)
            inside = grid[(grid > u1) & (grid < end)]
            edges = np.concatenate(([u1], inside, [end]))
            v, e = _u_cells(piece, edges[:-1], edges[1:], integrand, log_c, acc)
            values.append(math.fsum(v.tolist()))
            errors.append(math.fsum(e.tolist()))
            if u2 > LOG_BOUNDED_SPAN:
                q = 1.0 + LOG_BOUNDED_SPAN
                log_top = math.log(max(piece_sup_abs(piece, piece.a, piece.b), 1e-300))
                bound = float(integrand.power(q)) * max(log_top, 0.0) + float(integrand.offset(q, log_c))
                errors.append(math.exp(min(bound - LOG_BOUNDED_SPAN, LOG_OVERFLOW)))
            continue

        if piece.is_constant() and cfg.closed_forms:
            values.append(_log_closed_form(math.log(abs(piece.coeffs[0])) + log_c, u1, u2))
            continue
        if u2 - u1 <= GERM_SPAN:
            edges = np.append(np.arange(u1, u2, w), u2)
            v, e = _u_cells(piece, edges[:-1], edges[1:], integrand, log_c, acc)
            values.append(math.fsum(v.tolist()))
            errors.append(math.fsum(e.tolist()))
            continue
        if piece.unbounded_at_zero() and not math.isinf(u2):
            raise UnsupportedVariantError("unbounded function under a truncated log window")
        v, e = _log_ladder(piece, u1, u2, integrand, log_c, acc)
        values.append(v)
        errors.append(e)

    return math.fsum(values), math.fsum(errors), not acc.quadrature, acc.subdivisions


# ── Public operations ────────────────────────────────────────

def _integrate(f: Func, p: Exponent, log_c: float, integrand, cfg: QuadConfig) -> ModularResult:
    while isinstance(p, DualExponent):
        if not isinstance(integrand, PowerIntegrand):
            raise UnsupportedVariantError("profile integrals are taken against the primal exponent")
        integrand = PowerIntegrand(dual=not integrand.dual, clip=p.clip)
        p = p.primal

    factor, inner, window = peel_masks(f, p)
    if factor == 0.0 or window[0] >= window[1]:
        return ModularResult(ModularStatus.FINITE)
    log_c += math.log(abs(factor))

    try:
        if isinstance(p, (ConstantExponent, PiecewiseExponent)):
            plan = _piecewise_plan(inner, p, window, integrand.kind, cfg)
            value, error = plan.evaluate(integrand, log_c)
            closed, subdivisions = plan.closed_form, plan.subdivisions
        elif isinstance(p, SpikedExponent):
            plan = _spike_plan(inner, p, window, integrand.kind, cfg)
            value, error = plan.evaluate(integrand, log_c)
            closed, subdivisions = plan.closed_form, plan.subdivisions
        elif isinstance(p, LogExponent):
            value, error, closed, subdivisions = _log_integral(inner, window, integrand, log_c, cfg)
        else:
            raise UnsupportedVariantError(f"no modular for exponent {type(p).__name__}")
    except Divergence as exc:
        logger.debug("modular divergent: %s", exc.witness)
        return ModularResult(
            ModularStatus.DIVERGENT,
            value=math.inf,
            error_bound=0.0,
            divergence_witness=exc.witness,
            witness_region=exc.region,
            provenance=exc.provenance,
        )

    return ModularResult(
        ModularStatus.FINITE,
        value=value,
        error_bound=error,
        provenance="closed-form" if closed else "quadrature",
        subdivisions=subdivisions,
    )


def modular(f: Func, p: Exponent, cfg: QuadConfig | None = None) -> ModularResult:
    """ρ_p(f) = ∫ |f(t)|^p(t) dt."""
    return modular_scaled(f, p, 1.0, cfg)


def modular_scaled(f: Func, p: Exponent, lam: float, cfg: QuadConfig | None = None) -> ModularResult:
    """ρ_p(f / λ); non-increasing in λ."""
    if not (lam > 0 and math.isfinite(lam)):
        raise ParameterError(f"scale must be positive and finite, got {lam}")
    return _integrate(f, p, -math.log(lam), PowerIntegrand(), cfg or QuadConfig())


def profile_integral(
    v: Func, p: Exponent, kind: str, mu: float, cfg: QuadConfig | None = None
) -> ModularResult:
    """Integrals of the Lagrange profile x_mu = sgn(v) (|v| / (mu p))^(1/(p-1)).

    kind="modular" gives ρ_p(x_mu); kind="pairing" gives ∫ v x_mu.
    """
    if kind not in ("modular", "pairing"):
        raise ParameterError(f"profile kind must be 'modular' or 'pairing', got {kind}")
    if not mu > 0:
        raise ParameterError(f"multiplier must be positive, got {mu}")
    integrand = ProfileIntegrand(mu, pairing=kind == "pairing")
    return _integrate(v, p, 0.0, integrand, cfg or QuadConfig())


def _product_integral(x: Func, v: Func, cfg: QuadConfig, absolute: bool) -> ModularResult:
    acc = Accumulator(cfg)
    px, pv = canonical(x), canonical(v)
    points = sorted({0.0, 1.0, *(q.a for q in px), *(q.a for q in pv)})
    starts_x, starts_v = [q.a for q in px], [q.a for q in pv]
    exact, values, errors = [], [], []
    wrap = np.abs if absolute else (lambda y: y)

    try:
        for a, b in zip(points, points[1:]):
            mid = 0.5 * (a + b)
            gx = px[int(np.searchsorted(starts_x, mid, side="right")) - 1]
            gv = pv[int(np.searchsorted(starts_v, mid, side="right")) - 1]
            if gx.is_zero() or gv.is_zero():
                continue
            if gx.is_polynomial() and gv.is_polynomial():
                product = np.trim_zeros(np.polynomial.polynomial.polymul(gx.coeffs, gv.coeffs), "b")
                if product.size == 0:
                    continue
                roots = np.polynomial.polynomial.polyroots(product) if product.size > 1 else np.array([])
                cuts = sorted(float(r.real) for r in roots if abs(r.imag) < 1e-12 and a < r.real < b)
                edges = np.array([a, *cuts, b]) if absolute else np.array([a, b])
                antiderivative = np.polynomial.polynomial.polyint(product)
                pieces = np.diff(np.polynomial.polynomial.polyval(edges, antiderivative))
                exact.extend((np.abs(pieces) if absolute else pieces).tolist())
                continue
            if a == 0.0 and (gx.unbounded_at_zero() or gv.unbounded_at_zero()):
                if not absolute:
                    raise UnsupportedVariantError("signed product integral of an unbounded function")

                def func(t, gx=gx, gv=gv):
                    return np.abs(gx.values(t) * gv.values(t))

                value, error = _t_ladder(func, b, acc, "|x v| is not integrable at t = 0")
                values.append(value)
                errors.append(error)
                continue
            v_, e_ = adaptive(
                lambda t, _, gx=gx, gv=gv: wrap(gx.values(t) * gv.values(t)), [a], [b], acc
            )
            values.extend(v_.tolist())
            errors.extend(e_.tolist())
    except Divergence as exc:
        return ModularResult(
            ModularStatus.DIVERGENT,
            value=math.inf,
            divergence_witness=exc.witness,
            witness_region=exc.region,
            provenance=exc.provenance,
        )

    return ModularResult(
        ModularStatus.FINITE,
        value=math.fsum(exact + values),
        error_bound=math.fsum(errors),
        provenance="quadrature" if acc.quadrature else "closed-form",
        subdivisions=acc.subdivisions,
    )


def integrate_abs_product(x: Func, v: Func, cfg: QuadConfig | None = None) -> ModularResult:
    """∫ |x(t) v(t)| dt."""
    return _product_integral(x, v, cfg or QuadConfig(), absolute=True)


def integrate_product(x: Func, v: Func, cfg: QuadConfig | None = None) -> ModularResult:
    """∫ x(t) v(t) dt; the value may be negative."""
    return _product_integral(x, v, cfg or QuadConfig(), absolute=False)
