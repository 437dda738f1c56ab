"""Functions x(·) on [0, 1] fed to modulars and norms.

Every Func reduces to a canonical piecewise form: sorted breaks covering [0, 1]
and, on each piece, a cubic in absolute t plus optional analytic terms. Sum,
Scaled and Masked are closed under that form, which is what the kernels
integrate and what the sup-norm search walks.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from config.settings import SAMPLE_BREAKPOINTS, SIMPLE_CELLS
from core.errors import DomainError, ParameterError, UnboundedFunctionError, UnboundedPointError
from core.exponent_model import Exponent, LevelSet, MeasSet, exponent_supremum, level_set

logger = logging.getLogger(__name__)

ANALYTIC_TAGS = ("sin", "exp", "power", "loginv")
MAX_DEGREE = 3
CONTINUITY_TOL = 1e-9


# ── Variants ─────────────────────────────────────────────────

@dataclass(frozen=True)
class Func:
    """Base of the function variants."""


@dataclass(frozen=True)
class Indicator(Func):
    region: MeasSet


@dataclass(frozen=True)
class PiecewisePoly(Func):
    """Polynomial pieces; coefficient rows are ascending powers of absolute t."""

    breaks: tuple[float, ...]
    coeffs: tuple[tuple[float, ...], ...]
    continuous: bool = False

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        if len(breaks) < 2 or breaks[0] != 0.0 or breaks[-1] != 1.0:
            raise ParameterError("polynomial breaks must start at 0 and end at 1")
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ParameterError("polynomial breaks must be strictly increasing")
        if len(self.coeffs) != len(breaks) - 1:
            raise ParameterError(
                f"expected {len(breaks) - 1} coefficient rows, got {len(self.coeffs)}"
            )
        rows = []
        for row in self.coeffs:
            row = tuple(float(c) for c in row)
            if not row or len(row) > MAX_DEGREE + 1:
                raise ParameterError(f"coefficient rows need 1 to {MAX_DEGREE + 1} entries")
            if any(not math.isfinite(c) for c in row):
                raise ParameterError("coefficients must be finite")
            rows.append(row + (0.0,) * (MAX_DEGREE + 1 - len(row)))
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coeffs", tuple(rows))
        if self.continuous:
            for k, b in enumerate(breaks[1:-1], start=1):
                left = _polyval(rows[k - 1], b)
                right = _polyval(rows[k], b)
                if abs(left - right) > CONTINUITY_TOL * max(1.0, abs(left), abs(right)):
                    raise ParameterError(f"pieces do not match at break {b}: {left} vs {right}")


@dataclass(frozen=True)
class NamedAnalytic(Func):
    tag: str
    param: float = 0.0

    def __post_init__(self):
        if self.tag not in ANALYTIC_TAGS:
            raise ParameterError(f"unknown analytic tag '{self.tag}', expected one of {ANALYTIC_TAGS}")
        object.__setattr__(self, "param", float(self.param))


@dataclass(frozen=True)
class Scaled(Func):
    inner: Func
    factor: float


@dataclass(frozen=True)
class Sum(Func):
    terms: tuple[Func, ...]


@dataclass(frozen=True)
class Masked(Func):
    inner: Func
    mask: MeasSet


def constant_func(c: float) -> PiecewisePoly:
    return PiecewisePoly((0.0, 1.0), ((float(c),),), continuous=True)


# ── Canonical form ───────────────────────────────────────────

@dataclass(frozen=True)
class Piece:
    a: float
    b: float
    coeffs: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    terms: tuple[tuple[float, str, float], ...] = ()

    def is_zero(self) -> bool:
        return not self.terms and not any(self.coeffs)

    def is_constant(self) -> bool:
        return not self.terms and not any(self.coeffs[1:])

    def is_polynomial(self) -> bool:
        return not self.terms

    def unbounded_at_zero(self) -> bool:
        if self.a > 0.0:
            return False
        return any(_term_unbounded(tag, param) for _, tag, param in self.terms)

    def values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.polynomial.polynomial.polyval(t, self.coeffs)
        for weight, tag, param in self.terms:
            out = out + weight * analytic_values(tag, param, t)
        return out

    def values_in_u(self, u) -> np.ndarray:
        """Values at t = exp(-u), keeping analytic terms exact when t underflows."""
        u = np.asarray(u, dtype=float)
        out = np.polynomial.polynomial.polyval(np.exp(-u), self.coeffs)
        for weight, tag, param in self.terms:
            if tag == "power":
                out = out + weight * np.exp(-param * u)
            elif tag == "loginv":
                out = out + weight * (1.0 + u)
            else:
                out = out + weight * analytic_values(tag, param, np.exp(-u))
        return out

    def value(self, t: float) -> float:
        return float(self.values(np.array([t]))[0])

    def scaled(self, factor: float) -> "Piece":
        return Piece(
            self.a,
            self.b,
            tuple(factor * c for c in self.coeffs),
            tuple((factor * w, tag, param) for w, tag, param in self.terms if factor * w != 0.0),
        )

    def restricted(self, a: float, b: float) -> "Piece":
        return Piece(a, b, self.coeffs, self.terms)


def _term_unbounded(tag: str, param: float) -> bool:
    return tag == "loginv" or (tag == "power" and param < 0.0)


def _polyval(coeffs, t: float) -> float:
    return float(np.polynomial.polynomial.polyval(t, coeffs))


def analytic_values(tag: str, param: float, t):
    t = np.asarray(t, dtype=float)
    if tag == "sin":
        return np.sin(param * t)
    if tag == "exp":
        return np.exp(param * t)
    if tag == "power":
        if param == 0.0:
            return np.ones_like(t)
        with np.errstate(divide="ignore"):
            return np.power(t, param)
    if tag == "loginv":
        with np.errstate(divide="ignore"):
            return 1.0 - np.log(t)
    raise ParameterError(f"unknown analytic tag '{tag}'")


def _refine(pieces: tuple[Piece, ...], cuts) -> list[Piece]:
    """Split pieces at every cut point inside (0, 1)."""
    points = sorted({0.0, 1.0, *(p.a for p in pieces), *(c for c in cuts if 0.0 < c < 1.0)})
    starts = [p.a for p in pieces]
    out = []
    for a, b in zip(points, points[1:]):
        index = bisect.bisect_right(starts, 0.5 * (a + b)) - 1
        out.append(pieces[index].restricted(a, b))
    return out


def _combine(left: Piece, right: Piece) -> Piece:
    coeffs = tuple(x + y for x, y in zip(left.coeffs, right.coeffs))
    weights: dict[tuple[str, float], float] = {}
    for w, tag, param in left.terms + right.terms:
        weights[(tag, param)] = weights.get((tag, param), 0.0) + w
    terms = tuple((w, tag, param) for (tag, param), w in sorted(weights.items()) if w != 0.0)
    return Piece(left.a, left.b, coeffs, terms)


def _coalesce(pieces: list[Piece]) -> tuple[Piece, ...]:
    out: list[Piece] = []
    for piece in pieces:
        if out and out[-1].coeffs == piece.coeffs and out[-1].terms == piece.terms:
            out[-1] = Piece(out[-1].a, piece.b, piece.coeffs, piece.terms)
        else:
            out.append(piece)
    return tuple(out)


@lru_cache(maxsize=256)
def canonical(f: Func) -> tuple[Piece, ...]:
    """Sorted pieces covering [0, 1]."""
    if isinstance(f, Indicator):
        pieces, cursor = [], 0.0
        for a, b in f.region.intervals:
            if a > cursor:
                pieces.append(Piece(cursor, a))
            pieces.append(Piece(a, b, (1.0, 0.0, 0.0, 0.0)))
            cursor = b
        if cursor < 1.0:
            pieces.append(Piece(cursor, 1.0))
        return tuple(pieces)

    if isinstance(f, PiecewisePoly):
        return _coalesce(
            [Piece(a, b, row) for a, b, row in zip(f.breaks, f.breaks[1:], f.coeffs)]
        )

    if isinstance(f, NamedAnalytic):
        return (Piece(0.0, 1.0, terms=((1.0, f.tag, f.param),)),)

    if isinstance(f, Scaled):
        return tuple(p.scaled(float(f.factor)) for p in canonical(f.inner))

    if isinstance(f, Sum):
        if not f.terms:
            return (Piece(0.0, 1.0),)
        parts = [canonical(term) for term in f.terms]
        cuts = {p.a for part in parts for p in part}
        refined = [_refine(part, cuts) for part in parts]
        merged = refined[0]
        for other in refined[1:]:
            merged = [_combine(x, y) for x, y in zip(merged, other)]
        return _coalesce(merged)

    if isinstance(f, Masked):
        inner = canonical(f.inner)
        refined = _refine(inner, f.mask.endpoints())
        out = [
            p if f.mask.contains(0.5 * (p.a + p.b)) else Piece(p.a, p.b)
            for p in refined
        ]
        return _coalesce(out)

    raise ParameterError(f"unknown function variant {type(f).__name__}")


def is_zero(f: Func) -> bool:
    return all(p.is_zero() for p in canonical(f))


def is_bounded(f: Func) -> bool:
    return not any(p.unbounded_at_zero() for p in canonical(f))


# ── Operations ───────────────────────────────────────────────

def eval_func(f: Func, t: float) -> float:
    """Pointwise value f(t) for t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t = {t} is outside [0, 1]")
    return _eval(f, t)


def _eval(f: Func, t: float) -> float:
    if isinstance(f, Indicator):
        return 1.0 if f.region.contains(t) else 0.0
    if isinstance(f, PiecewisePoly):
        index = min(bisect.bisect_right(f.breaks, t) - 1, len(f.coeffs) - 1)
        return _polyval(f.coeffs[index], t)
    if isinstance(f, NamedAnalytic):
        if t == 0.0 and _term_unbounded(f.tag, f.param):
            raise UnboundedPointError(f"{f.tag}({f.param}) is unbounded at t = 0")
        return float(analytic_values(f.tag, f.param, t))
    if isinstance(f, Scaled):
        return float(f.factor) * _eval(f.inner, t)
    if isinstance(f, Sum):
        return math.fsum(_eval(term, t) for term in f.terms)
    if isinstance(f, Masked):
        return _eval(f.inner, t) if f.mask.contains(t) else 0.0
    raise ParameterError(f"unknown function variant {type(f).__name__}")


def truncate_to_level(f: Func, p: Exponent, n: float) -> Func:
    """x^(n) = x restricted to Omega_n."""
    omega = level_set(p, n)
    if exponent_supremum(p) <= n:
        return f
    return Masked(f, omega)


def residual_above_level(f: Func, p: Exponent, n: float) -> Func:
    """f restricted to {p > n}, i.e. f - truncate_to_level(f, p, n)."""
    return Masked(f, level_set(p, n).complement())


@dataclass(frozen=True)
class SupResult:
    value: float
    t0: float


def sup_norm_argmax(f: Func) -> SupResult:
    """max |f| and the leftmost point attaining it (one-sided limits count at breaks)."""
    candidates: list[tuple[float, float]] = []
    for piece in canonical(f):
        if piece.is_zero():
            candidates.append((piece.a, 0.0))
            continue
        if piece.unbounded_at_zero():
            raise UnboundedFunctionError(
                f"function is unbounded near t = 0 (terms {piece.terms})"
            )
        points = [piece.a, piece.b]
        if piece.is_polynomial():
            points.extend(_critical_points(piece))
        else:
            points.extend(_analytic_maxima(piece))
        for t in points:
            candidates.append((t, abs(piece.value(t))))

    best = max(v for _, v in candidates)
    t0 = min(t for t, v in candidates if v >= best * (1.0 - 1e-14))
    return SupResult(best, t0)


def _critical_points(piece: Piece) -> list[float]:
    derivative = np.polynomial.polynomial.polyder(piece.coeffs)
    derivative = np.trim_zeros(np.asarray(derivative), "b")
    if derivative.size <= 1:
        return []
    roots = np.polynomial.polynomial.polyroots(derivative)
    real = roots[np.abs(roots.imag) < 1e-12].real
    return [float(r) for r in real if piece.a < r < piece.b]


def _analytic_maxima(piece: Piece, grid: int = 257) -> list[float]:
    ts = np.linspace(piece.a, piece.b, grid)
    values = np.abs(piece.values(ts))
    i = int(np.argmax(values))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    if hi <= lo:
        return [float(ts[i])]
    result = minimize_scalar(
        lambda t: -abs(piece.value(t)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return [float(ts[i]), float(result.x)]


def piece_sup_abs(piece: Piece, a: float, b: float) -> float:
    """max |piece| on [a, b]; a grid estimate for analytic pieces."""
    points = [a, b]
    if piece.is_polynomial():
        points.extend(t for t in _critical_points(piece) if a < t < b)
    else:
        points.extend(np.linspace(a, b, 65).tolist())
    return float(np.max(np.abs(piece.values(np.array(points)))))


def sup_abs_difference(f: Func, g: Func) -> float:
    """‖f - g‖_∞."""
    return sup_norm_argmax(Sum((f, Scaled(g, -1.0)))).value


# ── Seeded sample families ───────────────────────────────────

def random_piecewise_linear(
    rng: np.random.Generator, breakpoints: int = SAMPLE_BREAKPOINTS
) -> PiecewisePoly:
    """Continuous piecewise-linear function with sup-norm exactly 1."""
    knots = int(rng.integers(2, breakpoints + 1))
    interior = np.unique(rng.uniform(0.0, 1.0, size=knots - 2))
    xs = np.concatenate(([0.0], interior[(interior > 0.0) & (interior < 1.0)], [1.0]))
    ys = rng.uniform(-1.0, 1.0, size=xs.size)
    ys = ys / np.max(np.abs(ys))
    rows = []
    for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]):
        slope = (y1 - y0) / (x1 - x0)
        rows.append((y0 - slope * x0, slope))
    return PiecewisePoly(tuple(xs.tolist()), tuple(rows), continuous=True)


def random_simple_on(
    rng: np.random.Generator, mask: MeasSet, cells: int = SIMPLE_CELLS, scale: float = 1.0
) -> Func:
    """Step function on equal cells with values on the grid k/8, supported on mask."""
    breaks = tuple(k / cells for k in range(cells + 1))
    values = rng.integers(-8, 9, size=cells) / 8.0 * scale
    step = PiecewisePoly(breaks, tuple((float(v),) for v in values))
    if isinstance(mask, LevelSet) or not mask.is_full():
        return Masked(step, mask)
    return step
