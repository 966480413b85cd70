import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thinsteklov.core import (
    Profile,
    ProblemParams,
    derived_constants,
    distortion_factor,
    n_factor,
    profile_eval,
    unit_ball_volume,
    validate_params,
)
from thinsteklov.errors import (
    BadDimension,
    NonPositive,
    NonPositiveProfile,
    OutOfDomain,
    SigmaOutOfRange,
)

from conftest import SHIPPED_PROFILES


class TestValidateParams:
    def test_valid_negative_sigma_n2(self):
        p = ProblemParams(n=2, sigma=-0.9, mu=1.0, l=1.0)
        assert validate_params(p) is p

    def test_sigma_out_of_range_n3(self):
        with pytest.raises(SigmaOutOfRange):
            validate_params(ProblemParams(n=3, sigma=-0.9, mu=1.0, l=1.0))

    def test_mu_zero(self):
        with pytest.raises(NonPositive):
            validate_params(ProblemParams(n=2, sigma=0.3, mu=0.0, l=1.0))

    @pytest.mark.parametrize("kw", [{"l": 0.0}, {"l": -1.0}, {"epsilon": 0.0}, {"epsilon": -0.1}])
    def test_nonpositive(self, kw):
        with pytest.raises(NonPositive):
            validate_params(ProblemParams(**{"n": 2, "sigma": 0.3, "mu": 1.0, "l": 1.0, **kw}))

    def test_bad_dimension(self):
        with pytest.raises(BadDimension):
            validate_params(ProblemParams(n=1, sigma=0.0))

    @pytest.mark.parametrize("sigma", [1.0, 1.5, -1.0])
    def test_sigma_endpoints_excluded(self, sigma):
        with pytest.raises(SigmaOutOfRange):
            validate_params(ProblemParams(n=2, sigma=sigma))


class TestConstants:
    def test_n_factor_examples(self):
        assert n_factor(2, 0.3) == pytest.approx(1.0, rel=1e-15)
        assert n_factor(3, 0.0) == 2.0
        assert n_factor(3, 0.5) == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_distortion_examples(self):
        assert distortion_factor(2, 0.3) == pytest.approx(0.91, rel=1e-15)
        for n in range(2, 7):
            assert distortion_factor(n, 0.0) == 1.0
        assert distortion_factor(3, 0.5) == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_unit_ball_volume(self):
        assert unit_ball_volume(1) == pytest.approx(2.0, rel=1e-15)
        assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)
        with pytest.raises(BadDimension):
            unit_ball_volume(0)

    def test_derived_bundle(self):
        d = derived_constants(3, 0.5)
        assert d.n_factor == pytest.approx(4 / 3)
        assert d.distortion == pytest.approx(2 / 3)
        assert d.ball_volume == pytest.approx(math.pi)

    def test_n2_factor_identically_one(self):
        for sigma in np.linspace(-1 + 1e-3, 1 - 1e-3, 100):
            assert n_factor(2, sigma) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("n", range(2, 7))
    def test_distortion_positive_on_grid(self, n):
        lo = -1.0 / (n - 1) + 1e-3
        for sigma in np.linspace(lo, 1 - 1e-3, 200):
            d = distortion_factor(n, sigma)
            assert 0 < d <= 1

    @given(n=st.integers(2, 12), frac=st.floats(1e-6, 1 - 1e-6))
    def test_distortion_in_unit_interval(self, n, frac):
        lo = -1.0 / (n - 1)
        sigma = lo + frac * (1.0 - lo)
        assert 0 < distortion_factor(n, sigma) <= 1


class TestProfiles:
    def test_constant(self):
        assert profile_eval(Profile.constant(1.0), 0.3) == (1.0, 0.0, 0.0)

    def test_cosine_bump_center(self):
        rho, d1, d2 = profile_eval(Profile.cosine_bump(1.0, 0.3, l=1.0), 0.0)
        assert rho == pytest.approx(1.3)
        assert d1 == pytest.approx(0.0, abs=1e-15)
        assert d2 == pytest.approx(-0.3 * math.pi ** 2)

    def test_polynomial(self):
        assert profile_eval(Profile.polynomial([1.0, 1.0]), 0.5) == pytest.approx((1.5, 1.0, 0.0))

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomain):
            profile_eval(Profile.constant(1.0, l=1.0), 1.5)

    def test_nonpositive(self):
        with pytest.raises(NonPositiveProfile):
            profile_eval(Profile.polynomial([1.0, 1.0]), -1.0)
        with pytest.raises(NonPositiveProfile):
            Profile.polynomial([1.0, 1.0]).check_positive()

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Profile("spline", (1.0,))

    @pytest.mark.parametrize("name", sorted(SHIPPED_PROFILES))
    def test_derivatives_match_finite_differences(self, name):
        prof = SHIPPED_PROFILES[name]
        h = 1e-5
        for x in np.linspace(-0.9, 0.9, 37):
            rho, d1, d2 = profile_eval(prof, x)
            rp, _, _ = profile_eval(prof, x + h)
            rm, _, _ = profile_eval(prof, x - h)
            fd1 = (rp - rm) / (2 * h)
            scale1 = max(abs(d1), 1.0)
            scale2 = max(abs(d2), 1.0)
            assert abs(fd1 - d1) / scale1 <= 1e-6
            # rho'' is checked against differences of rho'; a second difference
            # of rho at h=1e-5 carries ~eps/h^2 = 2e-6 roundoff on its own
            dp = profile_eval(prof, x + h)[1]
            dm = profile_eval(prof, x - h)[1]
            assert abs((dp - dm) / (2 * h) - d2) / scale2 <= 1e-6

    @pytest.mark.parametrize("name", sorted(SHIPPED_PROFILES))
    def test_shipped_profiles_positive(self, name):
        SHIPPED_PROFILES[name].check_positive()
