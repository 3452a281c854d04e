from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sc

from stml.specfun import (
    ConvergenceError,
    EvalConfig,
    frac_poisson_sf,
    frac_poisson_weights,
    mittag_leffler,
    mwright,
    pochhammer,
    prabhakar,
)

# frozen 50-digit oracle values
E_HALF_MINUS_ONE = 0.42758357615580700441  # E_{1/2}(-1) = erfcx(1)
E2_HALF_MINUS_ONE = 0.15437156137190843934  # E^2_{1/2,1}(-1)
E_07_MINUS_ONE = 0.39961197811559939027
E_09_08_MINUS_12 = -0.0076254193854020871886
PHI_HALF_Y1 = [
    0.42758357615580700441,
    0.27321201478389856507,
    0.15437156137190843934,
    0.079226968941326750492,
    0.037572296215290844422,
]


class TestPochhammer:
    def test_empty_product(self):
        assert pochhammer(3.7, 0) == 1.0

    def test_zero_base(self):
        assert pochhammer(0.0, 2) == 0.0
        assert pochhammer(0.0, 0) == 1.0

    def test_product_form(self):
        assert pochhammer(0.5, 3) == pytest.approx(1.875, rel=1e-15)

    def test_negative_integer_base_is_finite(self):
        assert pochhammer(-2.0, 2) == pytest.approx(2.0)
        assert pochhammer(-2.0, 5) == 0.0

    def test_large_m_matches_log_gamma(self):
        m = 100
        ref = math.exp(math.lgamma(2.5 + m) - math.lgamma(2.5))
        assert pochhammer(2.5, m) == pytest.approx(ref, rel=1e-12)

    def test_overflow_signalled(self):
        with pytest.raises(OverflowError):
            pochhammer(10.0, 1000)

    def test_rejects_negative_m(self):
        with pytest.raises(ValueError):
            pochhammer(1.0, -1)


class TestMittagLeffler:
    def test_zero_argument(self):
        assert mittag_leffler(0.9, 1.0, 0.0) == 1.0

    def test_exponential_case(self):
        assert mittag_leffler(1.0, 1.0, -2.0) == pytest.approx(math.exp(-2.0), abs=1e-14)

    def test_golden_half(self):
        assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(E_HALF_MINUS_ONE, abs=1e-14)
        assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(float(sc.erfcx(1.0)), abs=1e-14)

    def test_golden_other_orders(self):
        assert mittag_leffler(0.7, 1.0, -1.0) == pytest.approx(E_07_MINUS_ONE, abs=1e-14)
        assert mittag_leffler(0.9, 0.8, -12.0) == pytest.approx(E_09_08_MINUS_12, abs=1e-12)

    @pytest.mark.parametrize("x", [0.3, 3.0, 9.5, 10.5, 25.0, 80.0])
    def test_erfcx_identity_across_regimes(self, x):
        # E_{1/2}(-sqrt(x)) = erfcx(sqrt(x)) on both sides of the series/asymptotic crossover
        z = math.sqrt(x)
        assert mittag_leffler(0.5, 1.0, -z) == pytest.approx(float(sc.erfcx(z)), abs=1e-13)

    @pytest.mark.parametrize("alpha,beta,z", [(0.3, 1.0, -4.0), (0.8, 1.2, -30.0), (0.95, 1.0, -10.0), (0.6, 0.6, -2.5)])
    def test_live_oracle(self, oracle, alpha, beta, z):
        ref = oracle.prabhakar(alpha, beta, 1.0, z)
        assert mittag_leffler(alpha, beta, z) == pytest.approx(ref, abs=1e-12 * max(1.0, abs(ref)))

    def test_positive_argument(self):
        assert mittag_leffler(1.0, 1.0, 1.5) == pytest.approx(math.exp(1.5), rel=1e-13)

    def test_vectorized(self):
        z = np.array([-0.5, -1.0, -2.0])
        out = mittag_leffler(1.0, 1.0, z)
        assert out.shape == (3,)
        np.testing.assert_allclose(out, np.exp(z), atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.0, 1.5, -0.1])
    def test_rejects_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            mittag_leffler(alpha, 1.0, -1.0)

    def test_non_convergence_is_signalled(self):
        with pytest.raises(ConvergenceError):
            mittag_leffler(0.5, 1.0, 5.0, EvalConfig(abs_tol=1e-14, max_terms=3))


class TestMittagLefflerProperties:
    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.75, 1.0])
    def test_bounded_and_monotone(self, alpha):
        x = np.linspace(0.0, 50.0, 100)
        e = mittag_leffler(alpha, 1.0, -x)
        assert np.all(e > 0) and np.all(e <= 1.0)
        assert np.all(np.diff(e) <= 1e-14)

    @pytest.mark.parametrize("alpha,lam", [(0.5, 1.0), (0.8, 2.0), (0.3, 0.5)])
    def test_derivative_identity(self, alpha, lam):
        x = np.linspace(0.2, 5.0, 12)
        d = 1e-5 * x
        fd = -(mittag_leffler(alpha, 1.0, -lam * (x + d) ** alpha) - mittag_leffler(alpha, 1.0, -lam * (x - d) ** alpha)) / (2 * d)
        ref = lam * x ** (alpha - 1) * mittag_leffler(alpha, alpha, -lam * x**alpha)
        np.testing.assert_allclose(fd, ref, rtol=1e-6)

    @pytest.mark.parametrize("beta,t", [(0.25, 1e12), (0.5, 1e4), (0.75, 1e4), (0.9, 1e4)])
    def test_large_argument_asymptote(self, beta, t):
        y = t**beta
        ratio = mittag_leffler(beta, 1.0, -y) * math.gamma(1 - beta) * y
        assert ratio == pytest.approx(1.0, rel=0.02)

    @settings(max_examples=40, deadline=None)
    @given(alpha=st.floats(0.1, 1.0), x=st.floats(0.0, 40.0))
    def test_unit_interval_property(self, alpha, x):
        v = mittag_leffler(alpha, 1.0, -x)
        assert 0.0 < v <= 1.0 + 1e-12


class TestPrabhakar:
    def test_gamma_zero(self):
        assert prabhakar(0.5, 1.0, 0.0, -3.0) == 1.0
        assert prabhakar(0.5, 2.5, 0.0, -3.0) == pytest.approx(1 / math.gamma(2.5), rel=1e-15)

    def test_gamma_one_reduction(self):
        assert prabhakar(0.7, 1.0, 1.0, -1.0) == pytest.approx(mittag_leffler(0.7, 1.0, -1.0), abs=1e-14)

    def test_golden(self):
        assert prabhakar(0.5, 1.0, 2.0, -1.0) == pytest.approx(E2_HALF_MINUS_ONE, abs=1e-14)

    def test_zero_argument(self):
        assert prabhakar(0.4, 1.0, 3.3, 0.0) == 1.0

    @pytest.mark.parametrize(
        "alpha,beta,gamma,z",
        [(0.5, 1.0, 2.0, -6.0), (0.8, 1.5, 0.5, -20.0), (0.3, 0.7, 1.7, -1.2), (0.9, 1.9, 3.0, -45.0)],
    )
    def test_live_oracle(self, oracle, alpha, beta, gamma, z):
        ref = oracle.prabhakar(alpha, beta, gamma, z)
        assert prabhakar(alpha, beta, gamma, z) == pytest.approx(ref, abs=1e-12 * max(1.0, abs(ref)))

    def test_rejects_negative_gamma(self):
        with pytest.raises(ValueError):
            prabhakar(0.5, 1.0, -0.5, -1.0)


class TestFractionalPoisson:
    def test_weights_golden(self):
        np.testing.assert_allclose(frac_poisson_weights(0.5, 1.0, 4), PHI_HALF_Y1, rtol=1e-12)

    def test_first_weight_is_survival(self):
        for beta in (0.3, 0.6, 0.9):
            assert frac_poisson_weights(beta, 2.0, 3)[0] == pytest.approx(mittag_leffler(beta, 1.0, -2.0), abs=1e-13)

    def test_poisson_limit(self):
        m = np.arange(11)
        ref = np.exp(-3.0) * 3.0**m / sc.factorial(m)
        np.testing.assert_allclose(frac_poisson_weights(1.0, 3.0, 10), ref, rtol=1e-13)

    @pytest.mark.parametrize("beta,y", [(0.25, 3.0), (0.5, 10.0), (0.9, 40.0)])
    def test_normalized_and_nonnegative(self, beta, y):
        w = frac_poisson_weights(beta, y, 400)
        assert np.all(w >= 0)
        assert w.sum() + frac_poisson_sf(beta, y, 400) == pytest.approx(1.0, abs=1e-12)

    def test_m_wright_half_is_gaussian(self):
        z = np.array([0.0, 0.4, 1.3, 3.0])
        np.testing.assert_allclose(mwright(0.5, z), np.exp(-(z**2) / 4) / math.sqrt(math.pi), rtol=1e-13)


class TestNearOne:
    """Orders close to 1, where the inverse-stable density is a narrow spike."""

    # 40-digit quadrature of the Zolotarev representation
    M_099 = {0.9: 0.5914088965370544, 1.0: 4.436535429106358, 1.05: 17.279673223439925}

    @pytest.mark.parametrize("z", sorted(M_099))
    def test_m_wright_values(self, z):
        assert mwright(0.99, z) == pytest.approx(self.M_099[z], rel=1e-12)

    @pytest.mark.parametrize("beta", [0.99, 0.999, 0.9999, 0.99995, 1 - 1e-7])
    @pytest.mark.parametrize("y", [1.0, 30.0])
    def test_weights_normalized(self, beta, y):
        w = frac_poisson_weights(beta, y, 400)
        assert w.sum() + frac_poisson_sf(beta, y, 400) == pytest.approx(1.0, abs=1e-11)
        assert w[0] == pytest.approx(mittag_leffler(beta, 1.0, -y), abs=1e-11)

    @pytest.mark.parametrize("beta", [0.995, 0.99995])
    def test_weights_against_series(self, oracle, beta):
        w = frac_poisson_weights(beta, 1.0, 3)
        for m in range(4):
            ref = oracle.prabhakar(beta, m * beta + 1.0, m + 1.0, -1.0)
            assert w[m] == pytest.approx(ref, abs=5e-12)
