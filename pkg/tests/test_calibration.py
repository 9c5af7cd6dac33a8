import math

import mpmath
import numpy as np
import pytest
from scipy.stats import norm

from egai.calibration import (
    DensityPair,
    calibrator_mass,
    check_calibrator,
    e_to_p,
    indicator_evalue,
    lr_evalue,
    p_to_e,
    power_calibrator,
)
from egai.core import Evidence, EvidenceError


def gaussian_shift(mu):
    return DensityPair(norm(0, 1).logpdf, norm(mu, 1).logpdf)


def test_lr_evalue_gaussian_shift():
    assert lr_evalue(3.0, gaussian_shift(3.0)).value == pytest.approx(math.exp(4.5), rel=1e-12)
    assert lr_evalue(0.0, gaussian_shift(3.0)).value == pytest.approx(math.exp(-4.5), rel=1e-12)


def test_lr_evalue_null_mean_is_one():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(20_000)
    dens = DensityPair(lambda v: -0.5 * v * v, lambda v: -0.5 * (v - 1.0) ** 2)
    e = np.array([lr_evalue(v, dens).value for v in x])
    se = e.std(ddof=1) / math.sqrt(e.size)
    assert abs(e.mean() - 1.0) < 3 * se


def test_lr_evalue_overflow():
    dens = DensityPair(lambda x: -1e6, lambda x: 1e6)
    with pytest.raises(EvidenceError, match="overflow"):
        lr_evalue(0.0, dens)


@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
def test_power_calibrator_mass_matches_tanh_sinh_oracle(eta):
    f = power_calibrator(eta)
    # geometric breakpoints tame the s^(eta-1) singularity for tanh-sinh
    with mpmath.workdps(30):
        pts = [0] + [mpmath.mpf(10) ** -k for k in range(200, 0, -10)] + [1]
        oracle = mpmath.quad(lambda s: eta * s ** (eta - 1), pts)
    assert abs(float(oracle) - 1.0) < 1e-12
    assert abs(calibrator_mass(f) - 1.0) < 1e-8
    check_calibrator(f)


def test_generic_calibrator_mass():
    # 2(1-s) integrates to one without a singularity
    assert calibrator_mass(lambda s: 2 * (1 - s)) == pytest.approx(1.0, abs=1e-12)
    check_calibrator(lambda s: 2 * (1 - s))


def test_check_calibrator_rejects_bad_inputs():
    with pytest.raises(ValueError, match="integrates"):
        check_calibrator(lambda s: 1.5)
    with pytest.raises(ValueError, match="non-increasing"):
        check_calibrator(lambda s: 2 * s)


def test_power_calibrator_range():
    with pytest.raises(ValueError):
        power_calibrator(1.0)


def test_p_to_e_values_and_singularity():
    assert p_to_e(Evidence.p(0.25), eta=0.5).value == pytest.approx(1.0)
    assert p_to_e(Evidence.p(1.0), eta=0.5).value == pytest.approx(0.5)
    with pytest.raises(EvidenceError, match="singularity"):
        p_to_e(Evidence.p(0.0))
    with pytest.raises(EvidenceError):
        p_to_e(Evidence.e(3.0))


def test_calibrated_uniform_has_unit_mean():
    # eta > 1/2 keeps the variance finite so the CLT-based SE is meaningful
    rng = np.random.default_rng(11)
    u = rng.random(100_000)
    e = 0.75 * u ** (-0.25)
    se = e.std(ddof=1) / math.sqrt(e.size)
    assert abs(e.mean() - 1.0) < 3 * se
    assert p_to_e(Evidence.p(float(u[0])), eta=0.75).value == pytest.approx(e[0], rel=1e-15)


def test_e_to_p():
    assert e_to_p(Evidence.e(20.0)).value == pytest.approx(0.05)
    assert e_to_p(Evidence.e(0.0)).value == 1.0
    assert e_to_p(Evidence.e(0.5)).value == 1.0


def test_indicator_evalue():
    assert indicator_evalue(Evidence.p(0.01), 0.05).value == pytest.approx(20.0)
    assert indicator_evalue(Evidence.p(0.2), 0.05).value == 0.0
    with pytest.raises(EvidenceError, match="degenerate"):
        indicator_evalue(Evidence.p(0.01), 0.0)
    # E[1{U <= a}/a] = 1 exactly under a uniform null
    rng = np.random.default_rng(3)
    u = rng.random(100_000)
    e = (u <= 0.1) / 0.1
    assert abs(e.mean() - 1.0) < 3 * e.std(ddof=1) / math.sqrt(e.size)
