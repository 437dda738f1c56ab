"""Norm axioms on random piecewise-linear functions under the unbounded exponents."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.exponent_model import LogExponent, build_spiked_exponent
from core.function_model import Scaled, Sum, random_piecewise_linear
from core.modular_kernel import modular_scaled
from core.norm_kernel import luxemburg_norm

EXPONENTS = {"log": LogExponent(), "spiked": build_spiked_exponent(10, 4, 2)}

seeds = st.integers(min_value=0, max_value=2**32 - 1)
factors = st.floats(min_value=0.1, max_value=10.0) | st.floats(min_value=-10.0, max_value=-0.1)


@pytest.mark.parametrize("name", sorted(EXPONENTS))
@settings(max_examples=10, deadline=None)
@given(seed=seeds, alpha=factors)
def test_norm_is_homogeneous(name, seed, alpha):
    p = EXPONENTS[name]
    f = random_piecewise_linear(np.random.default_rng(seed))
    base = luxemburg_norm(f, p).value
    assert luxemburg_norm(Scaled(f, alpha), p).value == pytest.approx(abs(alpha) * base, rel=1e-7)


@pytest.mark.parametrize("name", sorted(EXPONENTS))
@settings(max_examples=10, deadline=None)
@given(seed=seeds)
def test_unit_ball_contains_the_normalised_function(name, seed):
    p = EXPONENTS[name]
    f = random_piecewise_linear(np.random.default_rng(seed))
    norm = luxemburg_norm(f, p)
    assert modular_scaled(f, p, norm.bracket[1]).value <= 1.0 + 1e-12
    assert modular_scaled(f, p, norm.value).value <= 1.0 + 1e-6


@pytest.mark.parametrize("name", sorted(EXPONENTS))
@settings(max_examples=10, deadline=None)
@given(first=seeds, second=seeds, alpha=factors)
def test_triangle_inequality(name, first, second, alpha):
    p = EXPONENTS[name]
    f = random_piecewise_linear(np.random.default_rng(first))
    g = Scaled(random_piecewise_linear(np.random.default_rng(second)), alpha)
    total = luxemburg_norm(Sum((f, g)), p).value
    assert total <= luxemburg_norm(f, p).value + luxemburg_norm(g, p).value + 1e-8
