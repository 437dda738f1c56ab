import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import ParameterError
from core.exponent_model import (
    ConstantExponent,
    LogExponent,
    MeasSet,
    PiecewiseExponent,
    build_spiked_exponent,
    level_set,
)
from core.function_model import (
    Indicator,
    Masked,
    NamedAnalytic,
    PiecewisePoly,
    constant_func,
    random_piecewise_linear,
)
from core.modular_kernel import (
    ModularStatus,
    QuadConfig,
    integrate_abs_product,
    integrate_product,
    modular,
    modular_scaled,
    profile_integral,
)

QUADRATURE_ONLY = QuadConfig(closed_forms=False)
EXPONENTS = {
    "square": ConstantExponent(2.0),
    "piecewise": PiecewiseExponent((0.0, 0.3, 1.0), (1.5, 6.0)),
    "log": LogExponent(),
    "spiked": build_spiked_exponent(10, 4, 2),
}


def log_family_modular(lam: float) -> float:
    """ρ(1/λ) under p(t) = ln(e/t)."""
    return (1.0 / lam) / (1.0 + math.log(lam))


def test_quad_config_validation():
    with pytest.raises(ParameterError):
        QuadConfig(abs_tol=0.0)
    with pytest.raises(ParameterError):
        QuadConfig(divergence_cap=1.0)
    with pytest.raises(ParameterError):
        QuadConfig(endpoint_grading=1.5)
    assert QuadConfig(endpoint_grading=0.5).rung_width == pytest.approx(math.log(2.0))


def test_indicator_under_constant_exponent(square):
    result = modular(Indicator(MeasSet(((0.0, 0.25),))), square)
    assert result.status is ModularStatus.FINITE
    assert result.value == pytest.approx(0.25, rel=1e-12)
    assert result.provenance == "closed-form"


def test_polynomial_under_constant_exponent():
    result = modular(PiecewisePoly((0.0, 1.0), ((0.0, 1.0),)), ConstantExponent(3.0))
    assert result.value == pytest.approx(0.25, rel=1e-9)


def test_piecewise_constant_exponent():
    p = PiecewiseExponent((0.0, 0.5, 1.0), (2.0, 4.0))
    result = modular_scaled(constant_func(3.0), p, 1.0)
    assert result.value == pytest.approx(0.5 * 9.0 + 0.5 * 81.0, rel=1e-12)


@pytest.mark.parametrize("lam", [0.5, 0.75, 1.0, 2.0])
def test_log_family_closed_form(log_exponent, lam):
    result = modular_scaled(constant_func(1.0), log_exponent, lam)
    assert result.is_finite
    assert result.value == pytest.approx(log_family_modular(lam), rel=1e-8)


@pytest.mark.parametrize("lam", [0.5, 0.75, 1.0, 2.0])
def test_log_family_by_quadrature(log_exponent, lam):
    result = modular_scaled(constant_func(1.0), log_exponent, lam, QUADRATURE_ONLY)
    assert result.is_finite
    assert result.provenance == "quadrature"
    assert result.value == pytest.approx(log_family_modular(lam), rel=1e-7)


@pytest.mark.parametrize("cfg", [None, QUADRATURE_ONLY])
def test_constant_e_diverges_under_log_family(log_exponent, cfg):
    result = modular(constant_func(math.e), log_exponent, cfg)
    assert result.status is ModularStatus.DIVERGENT
    assert result.value == math.inf
    assert result.divergence_witness


def test_spiked_series(spiked):
    # ρ(1/λ) = Σ_j 2^-j λ^(-4j) = 1 / (2 λ^4 - 1)
    result = modular_scaled(constant_func(1.0), spiked, 2.0)
    assert result.value == pytest.approx(1.0 / 31.0, rel=1e-9)
    assert modular(constant_func(1.0), spiked).value == pytest.approx(1.0, rel=1e-9)


def test_spiked_divergence_below_the_threshold(spiked):
    assert not modular_scaled(constant_func(1.0), spiked, 0.8).is_finite
    assert modular_scaled(constant_func(1.0), spiked, 0.85).is_finite


def test_level_set_masks_are_integrated_exactly(spiked):
    # {p <= 8} holds levels 1 and 2: ρ(χ) = 2^-1 + 2^-2
    truncated = Masked(constant_func(1.0), level_set(spiked, 8.0))
    assert modular(truncated, spiked).value == pytest.approx(0.75, rel=1e-9)
    residual = Masked(constant_func(1.0), level_set(spiked, 8.0).complement())
    assert modular(residual, spiked).value == pytest.approx(0.25, rel=1e-9)


def test_scale_must_be_positive(square):
    with pytest.raises(ParameterError):
        modular_scaled(constant_func(1.0), square, 0.0)
    with pytest.raises(ParameterError):
        modular_scaled(constant_func(1.0), square, math.inf)


def test_product_integrals():
    t = PiecewisePoly((0.0, 1.0), ((0.0, 1.0),))
    one = constant_func(1.0)
    assert integrate_product(t, one).value == pytest.approx(0.5)
    assert integrate_product(t, one).provenance == "closed-form"
    centred = PiecewisePoly((0.0, 1.0), ((-1.0, 2.0),))
    assert integrate_abs_product(centred, one).value == pytest.approx(0.5)
    assert integrate_product(centred, one).value == pytest.approx(0.0, abs=1e-15)


def test_abs_product_with_an_integrable_singularity():
    result = integrate_abs_product(NamedAnalytic("power", -0.5), constant_func(1.0))
    assert result.is_finite
    assert result.value == pytest.approx(2.0, rel=1e-6)


def test_abs_product_with_a_non_integrable_singularity():
    result = integrate_abs_product(NamedAnalytic("power", -2.0), constant_func(1.0))
    assert not result.is_finite


def test_profile_kind_is_checked(square):
    with pytest.raises(ParameterError):
        profile_integral(constant_func(1.0), square, "dual", 1.0)
    with pytest.raises(ParameterError):
        profile_integral(constant_func(1.0), square, "modular", 0.0)


def test_profile_under_the_square_exponent(square):
    # x_mu = v / (2 mu): ρ(x_mu) = 1 / (4 mu^2), ∫ v x_mu = 1 / (2 mu)
    assert profile_integral(constant_func(1.0), square, "modular", 0.5).value == pytest.approx(1.0, rel=1e-6)
    assert profile_integral(constant_func(1.0), square, "pairing", 0.5).value == pytest.approx(1.0, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    lam=st.floats(min_value=0.2, max_value=5.0),
    ratio=st.floats(min_value=1.01, max_value=4.0),
)
def test_modular_is_non_increasing_in_scale(seed, lam, ratio):
    f = random_piecewise_linear(np.random.default_rng(seed))
    p = PiecewiseExponent((0.0, 0.5, 1.0), (1.5, 3.0))
    small = modular_scaled(f, p, lam).value
    large = modular_scaled(f, p, lam * ratio).value
    assert large <= small * (1.0 + 1e-9) + 1e-12


@pytest.mark.parametrize("name", sorted(EXPONENTS))
@pytest.mark.parametrize("a, b", [(0.0, 0.25), (0.1, 0.6), (0.5, 1.0), (0.0, 1.0)])
def test_indicator_modular_is_the_measure(name, a, b):
    result = modular(Indicator(MeasSet(((a, b),))), EXPONENTS[name])
    assert result.is_finite
    assert result.value == pytest.approx(b - a, rel=1e-8)


@pytest.mark.parametrize("name", sorted(EXPONENTS))
@settings(max_examples=10, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    split=st.floats(min_value=0.01, max_value=0.99),
)
def test_modular_is_additive_over_disjoint_supports(name, seed, split):
    p = EXPONENTS[name]
    f = random_piecewise_linear(np.random.default_rng(seed))
    left = modular(Masked(f, MeasSet(((0.0, split),))), p).value
    right = modular(Masked(f, MeasSet(((split, 1.0),))), p).value
    assert left + right == pytest.approx(modular(f, p).value, rel=1e-8, abs=1e-12)
