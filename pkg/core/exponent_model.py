"""Exponent functions p(·) on [0, 1].

Variants:
- ConstantExponent: p ≡ p0.
- PiecewiseExponent: constant on the pieces of a partition of [0, 1].
- LogExponent: p(t) = ln(e/t), unbounded at t = 0 and touching 1 at t = 1.
- SpikedExponent: each dyadic cell of level J (the "period") is cut, in relative
  coordinate u, into level pieces [1 - 2^(1-j), 1 - 2^(-j)) carrying
  max(base, slope * j). The pieces accumulate at the right end of every period,
  so every dyadic cell of level j <= J holds measure 2^(-2j) of level-j spikes.
  The mirrored form accumulates at the left end instead; with J = 0 it is the
  decreasing rearrangement of any spiked exponent with the same slope and base.
- DualExponent: the pointwise conjugate p' = p / (p - 1) of another exponent.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from config.settings import DUAL_CLIP, KOZV_STABILITY, KOZV_THRESHOLD
from core.errors import (
    DomainError,
    NotMeasurePreservingError,
    ParameterError,
    PoleError,
    UnboundedPointError,
    UnsupportedVariantError,
)

logger = logging.getLogger(__name__)

MAX_SPIKE_LEVELS = 24


# ── Variants ─────────────────────────────────────────────────

@dataclass(frozen=True)
class Exponent:
    """Base of the exponent variants; values are immutable and hashable."""


@dataclass(frozen=True)
class ConstantExponent(Exponent):
    value: float

    def __post_init__(self):
        value = float(self.value)
        if not math.isfinite(value) or value <= 1.0:
            raise ParameterError(f"constant exponent must be finite and > 1, got {self.value}")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class PiecewiseExponent(Exponent):
    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        values = tuple(float(v) for v in self.values)
        if len(breaks) < 2 or breaks[0] != 0.0 or breaks[-1] != 1.0:
            raise ParameterError("piecewise breaks must start at 0 and end at 1")
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise ParameterError("piecewise breaks must be strictly increasing")
        if len(values) != len(breaks) - 1:
            raise ParameterError(
                f"piecewise exponent needs {len(breaks) - 1} values, got {len(values)}"
            )
        if any(not math.isfinite(v) or v <= 1.0 for v in values):
            raise ParameterError("piecewise values must be finite and > 1")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)

    def lengths(self) -> np.ndarray:
        return np.diff(np.asarray(self.breaks))


@dataclass(frozen=True)
class LogExponent(Exponent):
    """p(t) = ln(e/t) = 1 - ln t."""


@dataclass(frozen=True)
class SpikedExponent(Exponent):
    levels: int
    slope: float
    base: float
    mirrored: bool = False

    def __post_init__(self):
        if int(self.levels) != self.levels or not 0 <= self.levels <= MAX_SPIKE_LEVELS:
            raise ParameterError(
                f"spike levels must be an integer in [0, {MAX_SPIKE_LEVELS}], got {self.levels}"
            )
        if not math.isfinite(self.slope) or self.slope <= 0:
            raise ParameterError(f"spike slope must be positive, got {self.slope}")
        if not math.isfinite(self.base) or self.base <= 1.0:
            raise ParameterError(f"spike base must be > 1, got {self.base}")
        object.__setattr__(self, "levels", int(self.levels))
        object.__setattr__(self, "slope", float(self.slope))
        object.__setattr__(self, "base", float(self.base))

    @property
    def period(self) -> float:
        return 2.0 ** -self.levels

    @property
    def periods(self) -> int:
        return 2**self.levels

    def level_value(self, j: int) -> float:
        return max(self.base, self.slope * j)

    def first_sloped_level(self) -> int:
        """Smallest level j with slope * j >= base."""
        return max(1, math.ceil(self.base / self.slope - 1e-12))

    def anchors(self) -> np.ndarray:
        """Accumulation points of the level pieces, one per period."""
        k = np.arange(self.periods, dtype=float)
        return (k if self.mirrored else k + 1.0) * self.period


@dataclass(frozen=True)
class DualExponent(Exponent):
    primal: Exponent
    clip: float = DUAL_CLIP


# ── Measurable sets ──────────────────────────────────────────

@dataclass(frozen=True)
class MeasSet:
    """Finite disjoint union of subintervals of [0, 1].

    Intervals are read as [a, b), except that b = 1 also contains t = 1.
    """

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        cleaned = []
        for a, b in sorted((float(a), float(b)) for a, b in self.intervals):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ParameterError("interval endpoints must be finite")
            a, b = max(a, 0.0), min(b, 1.0)
            if b <= a:
                continue
            if cleaned and a <= cleaned[-1][1]:
                cleaned[-1] = (cleaned[-1][0], max(cleaned[-1][1], b))
            else:
                cleaned.append((a, b))
        object.__setattr__(self, "intervals", tuple(cleaned))

    @classmethod
    def full(cls) -> "MeasSet":
        return cls(((0.0, 1.0),))

    @property
    def measure(self) -> float:
        return math.fsum(b - a for a, b in self.intervals)

    def is_full(self) -> bool:
        return self.intervals == ((0.0, 1.0),)

    def is_empty(self) -> bool:
        return not self.intervals

    @cached_property
    def _starts(self) -> list[float]:
        return [a for a, _ in self.intervals]

    def contains(self, t: float) -> bool:
        index = bisect.bisect_right(self._starts, t) - 1
        if index < 0:
            return False
        a, b = self.intervals[index]
        return a <= t < b or t == b == 1.0

    def complement(self) -> "MeasSet":
        gaps, cursor = [], 0.0
        for a, b in self.intervals:
            if a > cursor:
                gaps.append((cursor, a))
            cursor = b
        if cursor < 1.0:
            gaps.append((cursor, 1.0))
        return MeasSet(tuple(gaps))

    def intersect(self, other: "MeasSet") -> "MeasSet":
        out, i, j = [], 0, 0
        left, right = self.intervals, other.intervals
        while i < len(left) and j < len(right):
            a = max(left[i][0], right[j][0])
            b = min(left[i][1], right[j][1])
            if b > a:
                out.append((a, b))
            if left[i][1] < right[j][1]:
                i += 1
            else:
                j += 1
        return MeasSet(tuple(out))

    def endpoints(self) -> list[float]:
        return [x for interval in self.intervals for x in interval]


@dataclass(frozen=True)
class LevelSet(MeasSet):
    """A sublevel {p <= n} or superlevel {p > n} set that remembers its exponent.

    The float intervals may lose the tiniest pieces to underflow; `window` and
    `measure` stay exact, and the modular kernel integrates in level space when
    the mask belongs to the exponent being integrated.
    """

    exponent: Exponent | None = None
    level: float = 1.0
    above: bool = False

    @property
    def measure(self) -> float:
        upper = _measure_above(self.exponent, self.level)
        return upper if self.above else 1.0 - upper

    @property
    def window(self) -> tuple[float, float]:
        if self.above:
            return (self.level, math.inf)
        return (-math.inf, self.level)

    def complement(self) -> "LevelSet":
        return LevelSet(
            MeasSet.complement(self).intervals,
            exponent=self.exponent,
            level=self.level,
            above=not self.above,
        )


# ── Pointwise evaluation ─────────────────────────────────────

def dual_value(q: float, clip: float = 0.0) -> float:
    """Conjugate exponent q / (q - 1), with q clipped to at least 1 + clip."""
    if math.isinf(q):
        return 1.0
    q = max(q, 1.0 + clip)
    if q <= 1.0:
        raise PoleError(f"dual exponent has a pole at p = {q}")
    return q / (q - 1.0)


def eval_exponent(p: Exponent, t: float) -> float:
    """Return p(t) for t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t = {t} is outside [0, 1]")

    if isinstance(p, ConstantExponent):
        return p.value

    if isinstance(p, PiecewiseExponent):
        index = min(bisect.bisect_right(p.breaks, t) - 1, len(p.values) - 1)
        return p.values[index]

    if isinstance(p, LogExponent):
        if t == 0.0:
            raise UnboundedPointError("log exponent is +inf at t = 0")
        return 1.0 - math.log(t)

    if isinstance(p, SpikedExponent):
        return p.level_value(spike_level_at(p, t))

    if isinstance(p, DualExponent):
        try:
            q = eval_exponent(p.primal, t)
        except UnboundedPointError:
            return 1.0
        return dual_value(q)

    raise UnsupportedVariantError(f"unknown exponent variant {type(p).__name__}")


def spike_level_at(p: SpikedExponent, t: float) -> int:
    """Level index j of the piece containing t."""
    x = t / p.period
    k = math.floor(x)
    u = x - k
    if p.mirrored:
        if k >= p.periods:
            # t = 1 closes the last period
            k, u = p.periods - 1, 1.0
        if u == 0.0:
            raise UnboundedPointError(f"spiked exponent is +inf at t = {t}")
        return max(1, math.ceil(-math.log2(u)))
    gap = 1.0 - u
    if k >= p.periods:
        raise UnboundedPointError(f"spiked exponent is +inf at t = {t}")
    return math.floor(-math.log2(gap)) + 1


def exponent_supremum(p: Exponent) -> float:
    """Essential supremum p+ (inf for unbounded variants)."""
    if isinstance(p, ConstantExponent):
        return p.value
    if isinstance(p, PiecewiseExponent):
        return max(p.values)
    if isinstance(p, (LogExponent, SpikedExponent)):
        return math.inf
    if isinstance(p, DualExponent):
        if isinstance(p.primal, SpikedExponent):
            return dual_value(p.primal.level_value(1))
        return dual_value(exponent_infimum(p.primal))
    raise UnsupportedVariantError(f"unknown exponent variant {type(p).__name__}")


def exponent_infimum(p: Exponent) -> float:
    if isinstance(p, ConstantExponent):
        return p.value
    if isinstance(p, PiecewiseExponent):
        return min(p.values)
    if isinstance(p, LogExponent):
        return 1.0
    if isinstance(p, SpikedExponent):
        return p.level_value(1)
    if isinstance(p, DualExponent):
        return dual_value(exponent_supremum(p.primal))
    raise UnsupportedVariantError(f"unknown exponent variant {type(p).__name__}")


# ── Spike level bookkeeping ──────────────────────────────────

@dataclass
class LevelMeasures:
    """Measure of each spike level inside an interval.

    measure(j) = dense.get(j, 0) + sum(weight * 2^-j for weight, start in tails if j >= start)
    """

    dense: dict[int, float] = field(default_factory=dict)
    tails: list[tuple[float, int]] = field(default_factory=list)

    def measure(self, j: int) -> float:
        tail = sum(w * 2.0**-j for w, start in self.tails if j >= start)
        return self.dense.get(j, 0.0) + tail

    def max_dense_level(self) -> int:
        return max(self.dense, default=0)


def _piece_bounds(j: int) -> tuple[float, float]:
    return 1.0 - 2.0 ** (1 - j), 1.0 - 2.0**-j


def _level_of(u: float) -> int:
    """Level of relative position u in [0, 1) for the unmirrored layout."""
    return math.floor(-math.log2(1.0 - u)) + 1


def _add_relative_range(out: LevelMeasures, u0: float, u1: float, weight: float):
    """Accumulate levels of the relative range [u0, u1] of one period (unmirrored layout)."""
    if u1 <= u0:
        return
    j = _level_of(u0)
    if u1 >= 1.0:
        lo, hi = _piece_bounds(j)
        out.dense[j] = out.dense.get(j, 0.0) + weight * (hi - max(u0, lo))
        out.tails.append((weight, j + 1))
        return
    last = _level_of(u1) if u1 < 1.0 else j
    for level in range(j, last + 1):
        lo, hi = _piece_bounds(level)
        overlap = min(u1, hi) - max(u0, lo)
        if overlap > 0:
            out.dense[level] = out.dense.get(level, 0.0) + weight * overlap


def spike_level_measures(p: SpikedExponent, a: float, b: float) -> LevelMeasures:
    """Exact measure of every level piece of p inside [a, b)."""
    out = LevelMeasures()
    if b <= a:
        return out
    period = p.period
    big_a, big_b = a / period, b / period
    ka, kb = math.floor(big_a), math.floor(big_b)

    def add(u0, u1):
        if p.mirrored:
            u0, u1 = 1.0 - u1, 1.0 - u0
        _add_relative_range(out, u0, u1, period)

    if ka == kb:
        add(big_a - ka, big_b - ka)
        return out
    first_full = ka
    if big_a > ka:
        add(big_a - ka, 1.0)
        first_full = ka + 1
    full = kb - first_full
    if full > 0:
        out.tails.append((full * period, 1))
    if big_b > kb:
        add(0.0, big_b - kb)
    return out


def _measure_above(p: Exponent | None, n: float) -> float:
    if p is None:
        return 0.0
    if isinstance(p, ConstantExponent):
        return 1.0 if p.value > n else 0.0
    if isinstance(p, PiecewiseExponent):
        return math.fsum(length for length, v in zip(p.lengths(), p.values) if v > n)
    if isinstance(p, LogExponent):
        return math.exp(1.0 - n) if n >= 1.0 else 1.0
    if isinstance(p, SpikedExponent):
        return 2.0 ** -levels_at_most(p, n)
    raise UnsupportedVariantError(f"level sets are not interval-representable for {type(p).__name__}")


def levels_at_most(p: SpikedExponent, n: float) -> int:
    """Number of spike levels whose value is <= n (levels are contiguous from 1)."""
    if n < p.level_value(1):
        return 0
    return max(1, math.floor(n / p.slope + 1e-12))


# ── Operations ───────────────────────────────────────────────

def dual_exponent(p: Exponent) -> Exponent:
    """Pointwise conjugate exponent p'; dual_exponent(dual_exponent(p)) is p."""
    if isinstance(p, DualExponent):
        return p.primal
    if isinstance(p, ConstantExponent):
        return ConstantExponent(dual_value(p.value))
    if isinstance(p, PiecewiseExponent):
        return PiecewiseExponent(p.breaks, tuple(dual_value(v) for v in p.values))
    if isinstance(p, (LogExponent, SpikedExponent)):
        return DualExponent(p)
    raise UnsupportedVariantError(f"unknown exponent variant {type(p).__name__}")


def level_set(p: Exponent, n: float) -> LevelSet:
    """Omega_n = {t: p(t) <= n}, up to null sets."""
    if n < 1:
        raise ParameterError(f"level must be >= 1, got {n}")

    if isinstance(p, ConstantExponent):
        intervals = ((0.0, 1.0),) if p.value <= n else ()
    elif isinstance(p, PiecewiseExponent):
        intervals = tuple(
            (a, b) for a, b, v in zip(p.breaks, p.breaks[1:], p.values) if v <= n
        )
    elif isinstance(p, LogExponent):
        intervals = ((math.exp(1.0 - n), 1.0),)
    elif isinstance(p, SpikedExponent):
        count = levels_at_most(p, n)
        if count == 0:
            intervals = ()
        else:
            starts = np.arange(p.periods, dtype=float) * p.period
            keep = (1.0 - 2.0**-count) * p.period
            if p.mirrored:
                intervals = tuple(zip((starts + (p.period - keep)).tolist(), (starts + p.period).tolist()))
            else:
                intervals = tuple(zip(starts.tolist(), (starts + keep).tolist()))
    else:
        raise UnsupportedVariantError(
            f"level sets are not interval-representable for {type(p).__name__}"
        )
    return LevelSet(intervals, exponent=p, level=float(n), above=False)


def decreasing_rearrangement(p: Exponent) -> Exponent:
    """Non-increasing exponent equimeasurable with p."""
    if isinstance(p, (ConstantExponent, LogExponent)):
        return p

    if isinstance(p, PiecewiseExponent):
        order = sorted(range(len(p.values)), key=lambda i: -p.values[i])
        lengths = p.lengths()
        breaks, values = [0.0], []
        for i in order:
            if values and values[-1] == p.values[i]:
                breaks[-1] = breaks[-1] + lengths[i]
            else:
                values.append(p.values[i])
                breaks.append(breaks[-1] + lengths[i])
        breaks[-1] = 1.0
        return PiecewiseExponent(tuple(breaks), tuple(values))

    if isinstance(p, SpikedExponent):
        return SpikedExponent(0, p.slope, p.base, mirrored=True)

    raise UnsupportedVariantError(f"no decreasing rearrangement for {type(p).__name__}")


@dataclass(frozen=True)
class KozvResult:
    levels: tuple[int, ...]
    ratio_tail: tuple[float, ...]
    tail_max: float
    verdict: bool


def kozv_criterion(
    p: Exponent, grid_depth: int, threshold: float = KOZV_THRESHOLD
) -> KozvResult:
    """Evaluate p*(t) / ln(e/t) at t = 2^-k and decide whether its tail stays positive.

    The tail maximum over the last quarter of the grid must exceed `threshold`
    and stay within the stability band of the maximum over the last half.
    """
    if grid_depth < 4:
        raise ParameterError(f"KoZv grid depth must be >= 4, got {grid_depth}")
    pstar = decreasing_rearrangement(p)
    levels = tuple(range(1, grid_depth + 1))
    ratios = tuple(
        eval_exponent(pstar, 2.0**-k) / (1.0 + k * math.log(2.0)) for k in levels
    )
    half = max(ratios[grid_depth // 2:])
    quarter = max(ratios[(3 * grid_depth) // 4:])
    verdict = quarter > threshold and quarter >= (1.0 - KOZV_STABILITY) * half
    logger.debug("KoZv tail maxima half=%.6g quarter=%.6g verdict=%s", half, quarter, verdict)
    return KozvResult(levels, ratios, quarter, verdict)


def build_spiked_exponent(J: int, s: float, b: float) -> SpikedExponent:
    """Spiked exponent with J guaranteed spike levels, slope s and floor b."""
    if int(J) != J or J < 1:
        raise ParameterError(f"spike levels must be a positive integer, got {J}")
    return SpikedExponent(int(J), float(s), float(b))


def _dyadic_breaks(depth: int) -> tuple[float, ...]:
    cells = 2**depth
    return tuple(k / cells for k in range(cells + 1))


def discretize_exponent(p: Exponent, depth: int) -> PiecewiseExponent:
    """Cell averages of p on the dyadic grid with 2^depth cells."""
    if depth < 0:
        raise ParameterError(f"depth must be >= 0, got {depth}")
    breaks = _dyadic_breaks(depth)
    values = tuple(_cell_average(p, a, b) for a, b in zip(breaks, breaks[1:]))
    return PiecewiseExponent(breaks, values)


def _cell_average(p: Exponent, a: float, b: float) -> float:
    width = b - a
    if isinstance(p, ConstantExponent):
        return p.value
    if isinstance(p, PiecewiseExponent):
        total = 0.0
        for lo, hi, v in zip(p.breaks, p.breaks[1:], p.values):
            overlap = min(b, hi) - max(a, lo)
            if overlap > 0:
                total += overlap * v
        return total / width
    if isinstance(p, LogExponent):
        def antiderivative(t):
            return 2.0 * t - (t * math.log(t) if t > 0 else 0.0)

        return (antiderivative(b) - antiderivative(a)) / width
    if isinstance(p, SpikedExponent):
        measures = spike_level_measures(p, a, b)
        total = sum(m * p.level_value(j) for j, m in measures.dense.items())
        for weight, start in measures.tails:
            total += weight * _spike_tail_moment(p, start)
        return total / width
    raise UnsupportedVariantError(f"cannot discretize {type(p).__name__}")


def _spike_tail_moment(p: SpikedExponent, start: int) -> float:
    """sum_{j >= start} 2^-j * max(base, slope * j)."""
    sloped = max(start, p.first_sloped_level())
    flat = sum(2.0**-j * p.base for j in range(start, sloped))
    # sum_{j >= m} j 2^-j = (m + 1) 2^(1 - m)
    return flat + p.slope * (sloped + 1) * 2.0 ** (1 - sloped)


def shuffle_exponent(p: Exponent, permutation) -> Exponent:
    """Rearrange equal dyadic cells: new cell i carries the value of old cell permutation[i]."""
    perm = [int(i) for i in permutation]
    cells = len(perm)
    if cells == 0 or cells & (cells - 1):
        raise NotMeasurePreservingError(f"permutation length {cells} is not a power of two")
    if sorted(perm) != list(range(cells)):
        raise NotMeasurePreservingError("cell map is not a permutation of equal-length cells")

    if isinstance(p, ConstantExponent):
        return p
    if not isinstance(p, PiecewiseExponent):
        raise UnsupportedVariantError(
            f"shuffle needs a piecewise-constant exponent, got {type(p).__name__}; discretize first"
        )
    for b in p.breaks:
        if abs(b * cells - round(b * cells)) > 1e-9:
            raise ParameterError(f"break {b} is not on the dyadic grid of {cells} cells")

    depth = cells.bit_length() - 1
    breaks = _dyadic_breaks(depth)
    old = [eval_exponent(p, (a + b) / 2.0) for a, b in zip(breaks, breaks[1:])]
    return PiecewiseExponent(breaks, tuple(old[i] for i in perm))
