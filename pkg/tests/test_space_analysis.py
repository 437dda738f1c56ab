import math

import pytest

from core.errors import ParameterError, PreconditionError
from core.exponent_model import build_spiked_exponent
from core.function_model import constant_func
from core.space_analysis import (
    DYADIC_CAVEAT,
    ClosednessReport,
    FunctionalSpec,
    Verdict,
    closedness_constants,
    direct_sum_check,
    extension_bound,
    lattice_bound_check,
    linfty_separation_check,
    proximinality_check,
    separation_delta,
)


@pytest.fixture(scope="module")
def spiked_report():
    return closedness_constants(build_spiked_exponent(10, 4, 2), grid_depth=6, sample_count=10, seed=1)


@pytest.fixture(scope="module")
def spiked_exponent():
    return build_spiked_exponent(10, 4, 2)


# ── Closedness constants ─────────────────────────────────────

def test_square_exponent_is_not_closed(square):
    report = closedness_constants(square, grid_depth=6, sample_count=5, seed=1)
    assert report.verdict is Verdict.NOT_CLOSED
    for depth, value in report.depth_series:
        assert value == pytest.approx(2.0 ** (-depth / 2.0), abs=1e-6)
    assert report.C_est == pytest.approx(1.0, abs=1e-8)
    assert report.intervals_probed == 2**7 - 1
    assert report.dyadic_caveat == DYADIC_CAVEAT


def test_log_family_is_not_closed(log_exponent):
    report = closedness_constants(log_exponent, grid_depth=6, sample_count=5, seed=1)
    assert report.verdict is Verdict.NOT_CLOSED


def test_spiked_exponent_is_closed(spiked_report):
    assert spiked_report.verdict is Verdict.CLOSED
    values = [value for _, value in spiked_report.depth_series]
    assert abs(values[-1] - values[-3]) / values[-3] < 0.05
    # whole spike periods in every probed cell: ‖χ_I‖ = ((1 + |I|) / 2)^(1/4)
    assert values[-1] == pytest.approx(((1.0 + 2.0**-6) / 2.0) ** 0.25, abs=1e-6)
    assert spiked_report.delta_est == pytest.approx(
        spiked_report.c_est / (2.0 * spiked_report.c2_est)
    )
    assert 0 < spiked_report.c1_est <= spiked_report.c2_est


def test_closedness_parameters(square):
    with pytest.raises(ParameterError):
        closedness_constants(square, grid_depth=2)
    with pytest.raises(ParameterError):
        closedness_constants(square, grid_depth=4, sample_count=0)


# ── Separation and the direct sum ────────────────────────────

def test_separation_on_the_spiked_exponent(spiked_exponent, spiked_report):
    report = separation_delta(spiked_exponent, spiked_report, samples=8, seed=5)
    assert report.violations == 0
    assert report.replay_failures == 0
    assert report.replay_min_ratio >= 1.0 - 1e-6
    assert report.min_observed >= report.delta_bound - 1e-9
    assert report.min_distance_to_bound == pytest.approx(report.min_observed - report.delta_bound)


def test_separation_needs_a_closed_report(spiked_exponent):
    report = ClosednessReport(0.1, 1.0, 0.5, 1.0, 0.05, 6, Verdict.NOT_CLOSED)
    with pytest.raises(PreconditionError):
        separation_delta(spiked_exponent, report, samples=1)


def test_direct_sum(spiked_exponent, spiked_report):
    report = direct_sum_check(spiked_exponent, spiked_report.delta_est, samples=8, seed=5)
    assert report.failures == 0
    assert report.K_lower_ok and report.K_upper_ok
    assert report.projection_bound == pytest.approx(1.0 / spiked_report.delta_est)


def test_direct_sum_rejects_non_positive_delta(spiked_exponent):
    with pytest.raises(ParameterError):
        direct_sum_check(spiked_exponent, 0.0, samples=1)


# ── Functionals and extensions ───────────────────────────────

def test_functional_spec():
    with pytest.raises(ParameterError):
        FunctionalSpec(((1.5, 1.0),))
    psi = FunctionalSpec(((0.5, 1.0),), constant_func(1.0))
    assert psi.cstar_norm() == pytest.approx(2.0)
    assert psi.apply(constant_func(2.0)) == pytest.approx(4.0)
    signed = FunctionalSpec(((0.5, 1.0), (0.25, -1.0)))
    assert signed.cstar_norm() == 2.0
    assert signed.apply(constant_func(3.0)) == 0.0


@pytest.mark.parametrize(
    "psi",
    [
        FunctionalSpec(((0.5, 1.0),)),
        FunctionalSpec((), constant_func(1.0)),
        FunctionalSpec(((0.5, 1.0), (0.25, -1.0))),
    ],
    ids=["point-mass", "lebesgue", "difference"],
)
def test_extension_bound(spiked_exponent, spiked_report, psi):
    report = extension_bound(psi, spiked_exponent, spiked_report, samples=8, seed=9)
    assert report.violations == 0
    assert report.bound == pytest.approx(
        report.cstar_norm / (spiked_report.c1_est * spiked_report.delta_est)
    )


# ── Sup-norm remarks and proximinality ───────────────────────

@pytest.mark.parametrize("name", ["log", "spiked"])
def test_lattice_bound(name, log_exponent, spiked_exponent):
    p = log_exponent if name == "log" else spiked_exponent
    report = lattice_bound_check(p, samples=8, seed=2)
    assert report.violations == 0
    assert report.max_ratio <= 1.0 + 1e-9


def test_linfty_separation(spiked_exponent, spiked_report):
    report = linfty_separation_check(
        spiked_exponent, spiked_report.delta_est, samples=8, seed=4, c1=spiked_report.c1_est
    )
    assert report.violations == 0


def test_proximinality_under_the_log_family(log_exponent):
    report = proximinality_check(constant_func(1.0), log_exponent)
    assert report.passed(1e-3)
    assert report.d_value == pytest.approx(math.exp(-1.0), abs=1e-3)


def test_proximinality_under_the_spiked_exponent(spiked_exponent):
    report = proximinality_check(constant_func(1.0), spiked_exponent)
    assert report.passed(1e-3)
    assert report.d_value == pytest.approx(2.0**-0.25, abs=1e-4)


def test_linfty_separation_needs_a_positive_c1(spiked_exponent, spiked_report):
    with pytest.raises(TypeError):
        linfty_separation_check(spiked_exponent, spiked_report.delta_est)
    with pytest.raises(ParameterError):
        linfty_separation_check(spiked_exponent, spiked_report.delta_est, 0.0)


def test_spiked_exponent_stays_closed_at_depth_ten(spiked_exponent):
    report = closedness_constants(spiked_exponent, grid_depth=10, sample_count=4, seed=1)
    assert report.verdict is Verdict.CLOSED
    series = dict(report.depth_series)
    assert abs(series[10] - series[8]) / series[8] < 0.05
