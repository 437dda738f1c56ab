import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import (
    DomainError,
    NotMeasurePreservingError,
    ParameterError,
    PoleError,
    UnboundedPointError,
    UnsupportedVariantError,
)
from core.exponent_model import (
    ConstantExponent,
    DualExponent,
    LogExponent,
    MeasSet,
    PiecewiseExponent,
    SpikedExponent,
    build_spiked_exponent,
    decreasing_rearrangement,
    discretize_exponent,
    dual_exponent,
    dual_value,
    eval_exponent,
    exponent_infimum,
    exponent_supremum,
    kozv_criterion,
    level_set,
    shuffle_exponent,
    spike_level_measures,
)


# ── Construction ─────────────────────────────────────────────

@pytest.mark.parametrize("value", [1.0, 0.5, math.inf, math.nan])
def test_constant_rejects_values_at_or_below_one(value):
    with pytest.raises(ParameterError):
        ConstantExponent(value)


def test_piecewise_validates_partition():
    with pytest.raises(ParameterError):
        PiecewiseExponent((0.0, 0.5), (2.0,))
    with pytest.raises(ParameterError):
        PiecewiseExponent((0.0, 0.5, 0.5, 1.0), (2.0, 3.0, 4.0))
    with pytest.raises(ParameterError):
        PiecewiseExponent((0.0, 1.0), (2.0, 3.0))
    with pytest.raises(ParameterError):
        PiecewiseExponent((0.0, 1.0), (1.0,))


def test_spiked_parameters():
    with pytest.raises(ParameterError):
        build_spiked_exponent(0, 4, 2)
    with pytest.raises(ParameterError):
        build_spiked_exponent(3, -1, 2)
    with pytest.raises(ParameterError):
        build_spiked_exponent(3, 4, 1.0)
    p = build_spiked_exponent(10, 4, 2)
    assert p.period == 2.0**-10
    assert p.periods == 1024


# ── Evaluation ───────────────────────────────────────────────

def test_log_exponent_values(log_exponent):
    assert eval_exponent(log_exponent, 1.0) == 1.0
    assert eval_exponent(log_exponent, math.exp(-1.0)) == pytest.approx(2.0)
    with pytest.raises(UnboundedPointError):
        eval_exponent(log_exponent, 0.0)
    with pytest.raises(DomainError):
        eval_exponent(log_exponent, 1.5)


def test_spiked_levels_within_a_period(spiked):
    period = spiked.period
    assert eval_exponent(spiked, 0.0) == 4.0
    assert eval_exponent(spiked, 0.5 * period) == 8.0
    assert eval_exponent(spiked, 0.75 * period) == 12.0
    assert eval_exponent(spiked, period) == 4.0
    with pytest.raises(UnboundedPointError):
        eval_exponent(spiked, 1.0)


def test_spiked_base_floors_the_first_levels():
    p = SpikedExponent(2, 1.0, 3.5)
    assert eval_exponent(p, 0.0) == 3.5
    assert p.first_sloped_level() == 4


def test_piecewise_lookup():
    p = PiecewiseExponent((0.0, 0.25, 1.0), (2.0, 5.0))
    assert eval_exponent(p, 0.1) == 2.0
    assert eval_exponent(p, 0.25) == 5.0
    assert eval_exponent(p, 1.0) == 5.0


def test_supremum_and_infimum(spiked, log_exponent):
    assert exponent_supremum(spiked) == math.inf
    assert exponent_infimum(spiked) == 4.0
    assert exponent_supremum(log_exponent) == math.inf
    assert exponent_infimum(log_exponent) == 1.0
    assert exponent_supremum(PiecewiseExponent((0.0, 0.5, 1.0), (2.0, 3.0))) == 3.0


# ── Dual exponent ────────────────────────────────────────────

def test_dual_value():
    assert dual_value(2.0) == 2.0
    assert dual_value(math.inf) == 1.0
    assert dual_value(3.0) == pytest.approx(1.5)
    with pytest.raises(PoleError):
        dual_value(1.0)
    assert dual_value(1.0, clip=1e-6) == pytest.approx(1e6 + 1, rel=1e-9)


def test_dual_exponent_is_an_involution(log_exponent, spiked):
    assert dual_exponent(ConstantExponent(3.0)) == ConstantExponent(1.5)
    assert isinstance(dual_exponent(log_exponent), DualExponent)
    assert dual_exponent(dual_exponent(log_exponent)) == log_exponent
    assert dual_exponent(dual_exponent(spiked)) == spiked


def test_dual_of_log_at_one_is_unbounded_only_pointwise(log_exponent):
    dual = dual_exponent(log_exponent)
    assert eval_exponent(dual, 0.0) == 1.0
    assert eval_exponent(dual, math.exp(-1.0)) == pytest.approx(2.0)
    with pytest.raises(PoleError):
        eval_exponent(dual, 1.0)


# ── Level sets ───────────────────────────────────────────────

def test_level_set_measures(log_exponent, spiked, square):
    assert level_set(log_exponent, 3.0).measure == pytest.approx(1.0 - math.exp(-2.0))
    assert level_set(spiked, 8.0).measure == pytest.approx(0.75)
    assert level_set(spiked, 3.0).measure == 0.0
    assert level_set(square, 2.0).measure == 1.0
    assert level_set(spiked, 8.0).complement().measure == pytest.approx(0.25)


def test_level_set_rejects_levels_below_one(log_exponent):
    with pytest.raises(ParameterError):
        level_set(log_exponent, 0.5)


def test_level_set_survives_underflow(log_exponent):
    above = level_set(log_exponent, 800.0).complement()
    assert above.above
    assert above.window == (800.0, math.inf)


def test_measset_operations():
    s = MeasSet(((0.0, 0.25), (0.5, 0.75)))
    assert s.measure == 0.5
    assert s.contains(0.1) and not s.contains(0.3)
    assert s.complement().intervals == ((0.25, 0.5), (0.75, 1.0))
    assert s.intersect(MeasSet(((0.2, 0.6),))).intervals == ((0.2, 0.25), (0.5, 0.6))


def test_spike_level_measures_match_the_dyadic_layout(spiked):
    measures = spike_level_measures(spiked, 0.0, 1.0)
    for j in (1, 2, 5, 30):
        assert measures.measure(j) == pytest.approx(2.0**-j)
    # a level-3 dyadic cell holds 2^-6 of level-3 spikes
    cell = spike_level_measures(spiked, 0.0, 2.0**-3)
    assert cell.measure(3) == pytest.approx(2.0**-6)


# ── Rearrangement ────────────────────────────────────────────

def test_piecewise_rearrangement_is_non_increasing():
    p = PiecewiseExponent((0.0, 0.25, 0.5, 1.0), (2.0, 5.0, 3.0))
    pstar = decreasing_rearrangement(p)
    assert pstar.values == (5.0, 3.0, 2.0)
    assert pstar.breaks == pytest.approx((0.0, 0.25, 0.75, 1.0))


def test_spiked_rearrangement(spiked):
    pstar = decreasing_rearrangement(spiked)
    assert pstar == SpikedExponent(0, 4.0, 2.0, mirrored=True)
    assert eval_exponent(pstar, 0.3) == 8.0
    assert eval_exponent(pstar, 0.6) == 4.0


def test_spiked_rearrangement_at_the_right_endpoint(spiked):
    pstar = decreasing_rearrangement(spiked)
    assert eval_exponent(pstar, 1.0) == 4.0
    with pytest.raises(UnboundedPointError):
        eval_exponent(pstar, 0.0)


def test_rearrangement_rejects_dual(log_exponent):
    with pytest.raises(UnsupportedVariantError):
        decreasing_rearrangement(dual_exponent(log_exponent))


@settings(max_examples=40, deadline=None)
@given(n=st.floats(min_value=1.0, max_value=60.0))
def test_spiked_rearrangement_is_equimeasurable(n):
    p = build_spiked_exponent(10, 4, 2)
    pstar = decreasing_rearrangement(p)
    assert level_set(pstar, n).measure == level_set(p, n).measure


@settings(max_examples=40, deadline=None)
@given(
    values=st.lists(st.floats(min_value=1.1, max_value=20.0), min_size=1, max_size=8),
    n=st.floats(min_value=1.0, max_value=25.0),
)
def test_piecewise_rearrangement_is_equimeasurable(values, n):
    cells = len(values)
    p = PiecewiseExponent(tuple(k / cells for k in range(cells + 1)), tuple(values))
    pstar = decreasing_rearrangement(p)
    assert level_set(pstar, n).measure == pytest.approx(level_set(p, n).measure, abs=1e-12)
    assert all(a >= b for a, b in zip(pstar.values, pstar.values[1:]))


# ── Discretization and shuffles ──────────────────────────────

def test_discretize_log_depth_zero(log_exponent):
    p = discretize_exponent(log_exponent, 0)
    assert p.values == pytest.approx((2.0,))


def test_discretize_spiked_depth_zero(spiked):
    assert discretize_exponent(spiked, 0).values == pytest.approx((8.0,))


def test_discretize_keeps_the_mean(log_exponent):
    p = discretize_exponent(log_exponent, 6)
    assert len(p.values) == 64
    assert np.mean(p.values) == pytest.approx(2.0)


def test_shuffle_validates_permutation():
    p = discretize_exponent(LogExponent(), 2)
    with pytest.raises(NotMeasurePreservingError):
        shuffle_exponent(p, [0, 1, 2])
    with pytest.raises(NotMeasurePreservingError):
        shuffle_exponent(p, [0, 0, 1, 2])
    with pytest.raises(UnsupportedVariantError):
        shuffle_exponent(LogExponent(), [1, 0])
    assert shuffle_exponent(ConstantExponent(3.0), [1, 0]) == ConstantExponent(3.0)


def test_shuffle_moves_cells():
    p = PiecewiseExponent((0.0, 0.5, 1.0), (2.0, 3.0))
    shuffled = shuffle_exponent(p, [1, 0])
    assert shuffled.values == (3.0, 2.0)


# ── KoZv criterion ───────────────────────────────────────────

def test_kozv_log_ratio_is_one(log_exponent):
    result = kozv_criterion(log_exponent, 20)
    assert result.verdict
    assert result.tail_max == pytest.approx(1.0, abs=1e-3)


def test_kozv_rejects_bounded_exponents(square):
    assert not kozv_criterion(square, 20).verdict
    bounded = PiecewiseExponent((0.0, 0.5, 1.0), (2.0, 9.0))
    assert not kozv_criterion(bounded, 20).verdict


def test_kozv_spiked_tail():
    result = kozv_criterion(build_spiked_exponent(12, 4, 2), 20)
    assert result.verdict
    assert result.tail_max == pytest.approx(4.0 / math.log(2.0), rel=0.1)


def test_kozv_depth_must_be_at_least_four(log_exponent):
    with pytest.raises(ParameterError):
        kozv_criterion(log_exponent, 3)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_kozv_is_invariant_under_shuffles(seed):
    grid = discretize_exponent(LogExponent(), 8)
    permutation = np.random.default_rng(seed).permutation(256)
    shuffled = shuffle_exponent(grid, permutation)
    assert kozv_criterion(shuffled, 12) == kozv_criterion(grid, 12)
