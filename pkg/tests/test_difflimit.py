from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from stml import difflimit as d
from stml.difflimit import DensityGrid
from stml.laplacian import ProcessParams
from stml.specfun import ConvergenceError, mittag_leffler, prabhakar

# mpmath series oracle at 50 digits
ML_DENSITY_05 = 0.13660600739194928254
PRABHAKAR_KERNEL_05_2 = -0.19524878887821952101
GENERALIZED_05_05 = 0.099769126328845832658

# frozen from the double series (agreement to 1e-15)
STATE_GOLDENS = [
    ((0.5, 1.0), 1.0, 1.0, 0.08722706716066672),
    ((0.75, 1.0), 3.0, 2.0, 0.07565975876440117),
    ((0.5, 0.75), 0.7, 1.5, 0.1180074946859096),
    ((1.0, 1.0), 2.0, 1.0, 0.1192317192431485),
    ((0.75, 0.6), 5.0, 3.0, 0.03705088801419665),
]


class TestDensityGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            DensityGrid(0.0, np.zeros(3))
        with pytest.raises(ValueError):
            DensityGrid(0.1, np.zeros(1))
        with pytest.raises(ValueError):
            DensityGrid(0.1, np.array([0.0, np.nan]))
        with pytest.raises(ValueError):
            DensityGrid(0.1, np.zeros(3), edge_exponent=0.0)

    def test_regular_mass_smooth(self):
        h = 0.01
        g = DensityGrid(h, np.exp(-h * np.arange(1001)))
        assert g.regular_mass() == pytest.approx(1.0 - math.exp(-10.0), abs=1e-9)

    def test_regular_mass_singular(self):
        # x**(e-1) on [0, 1] integrates to 1/e
        e, h = 0.5, 0.01
        x = h * np.arange(101)
        vals = np.concatenate([[0.0], x[1:] ** (e - 1.0)])
        g = DensityGrid(h, vals, edge_exponent=e)
        assert g.regular_mass() == pytest.approx(1.0 / e, rel=1e-12)

    def test_mass_report(self):
        g = DensityGrid(0.5, np.zeros(6), delta_weight=0.25, tail_mass=0.5)
        rep = g.mass_report()
        assert rep["total_mass"] == pytest.approx(0.75)
        assert set(rep) == {"delta_weight", "regular_mass", "tail_mass", "total_mass"}

    def test_csv_roundtrip(self, tmp_path):
        g = DensityGrid(0.125, np.linspace(0.0, 1.0, 9) ** 2 / 3.0, delta_weight=0.3)
        path = g.to_csv(tmp_path / "grid.csv")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#") and "h=0.125" in lines[0] and "delta_weight=0.3" in lines[0]
        assert lines[1] == "x,value"
        back = DensityGrid.from_csv(path)
        assert back.h == g.h and back.delta_weight == g.delta_weight
        np.testing.assert_array_equal(back.values, g.values)


class TestMLDensity:
    def test_exponential(self):
        assert d.ml_density(1.0, 2.0, 1.0) == pytest.approx(2.0 * math.exp(-2.0), rel=1e-15)

    def test_golden(self):
        assert d.ml_density(0.5, 1.0, 1.0) == pytest.approx(ML_DENSITY_05, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            d.ml_density(0.5, 1.0, 0.0)

    def test_vectorized(self):
        x = np.array([[0.5, 1.0], [2.0, 3.0]])
        out = d.ml_density(0.5, 1.0, x)
        assert out.shape == x.shape
        assert out[0, 1] == pytest.approx(ML_DENSITY_05, rel=1e-12)

    @pytest.mark.parametrize("alpha,lam0", [(0.5, 1.0), (0.75, 2.0), (1.0, 1.5)])
    def test_normalization(self, alpha, lam0):
        g = d.ml_density_grid(alpha, lam0, 2e-3, 5_000)
        assert abs(g.total_mass() - 1.0) < 1e-6

    def test_cdf_matches_density(self):
        val, _ = integrate.quad(lambda x: d.ml_density(0.6, 1.3, x), 0.0, 2.0, limit=200)
        assert val == pytest.approx(d.ml_cdf(0.6, 1.3, 2.0), rel=1e-8)

    def test_cdf_at_zero(self):
        assert d.ml_cdf(0.5, 1.0, 0.0) == 0.0


class TestContinuumLimit:
    def test_exponential_limit(self):
        rep = d.discrete_to_continuum_check(ProcessParams(), [0.5, 1.0], [0.1, 0.05, 0.025])
        assert rep.decreasing
        # first-order convergence of (1/h)(1+h)**(-x/h) / (1+h)
        np.testing.assert_allclose(rep.errors[:-1] / rep.errors[1:], 2.0, rtol=0.05)

    def test_fractional_decreasing(self):
        rep = d.discrete_to_continuum_check(ProcessParams(alpha=0.5), [1.0], [0.1, 0.05, 0.025])
        assert bool(rep)
        assert rep.errors[-1] < rep.errors[0]

    def test_off_grid(self):
        with pytest.raises(ValueError):
            d.discrete_to_continuum_check(ProcessParams(alpha=0.5), [0.33], [0.1, 0.05])

    def test_origin_excluded(self):
        with pytest.raises(ValueError):
            d.discrete_to_continuum_check(ProcessParams(alpha=0.5), [0.0], [0.1, 0.05])

    def test_h_order(self):
        with pytest.raises(ValueError):
            d.discrete_to_continuum_check(ProcessParams(alpha=0.5), [1.0], [0.05, 0.1])


class TestPrabhakarKernel:
    def test_gamma_zero(self):
        assert d.prabhakar_kernel(0.5, 0.0, 1.0, 0.7) == 0.0

    def test_golden(self):
        assert d.prabhakar_kernel(0.5, 2.0, 1.0, 0.7) == pytest.approx(PRABHAKAR_KERNEL_05_2, rel=1e-11)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 1.0])
    def test_gamma_one_is_minus_ml_density(self, alpha):
        x = np.linspace(0.1, 6.0, 25)
        np.testing.assert_allclose(d.prabhakar_kernel(alpha, 1.0, 1.2, x), -d.ml_density(alpha, 1.2, x), rtol=1e-9)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 3.5])
    def test_derivative_of_prabhakar(self, gamma):
        alpha, lam0, x, dx = 0.6, 1.0, 0.8, 1e-5

        def F(u):
            return float(prabhakar(alpha, 1.0, gamma, -lam0 * u**alpha))

        fd = (F(x + dx) - F(x - dx)) / (2 * dx)
        assert d.prabhakar_kernel(alpha, gamma, lam0, x) == pytest.approx(fd, rel=1e-6)

    def test_rejects_negative_gamma(self):
        with pytest.raises(ValueError):
            d.prabhakar_kernel(0.5, -1.0, 1.0, 1.0)


class TestLaplacianDensity:
    @pytest.mark.parametrize("alpha", [0.5, 0.75])
    def test_zero_integral(self, alpha):
        # delta weight 1 plus the regular part integrates to zero
        reg, _ = integrate.quad(lambda x: d.laplacian_density(alpha, 1.0, x), 0.0, 50.0, limit=400)
        tail = 1.0 - d.ml_cdf(alpha, 1.0, 50.0)
        assert abs(1.0 + reg - tail) < 1e-6

    def test_negative(self):
        x = np.logspace(-4, 3, 200)
        assert np.all(d.laplacian_density(0.5, 1.0, x) < 0)


class TestGeneralizedTransition:
    def test_mu_one(self):
        x = np.linspace(0.2, 4.0, 10)
        np.testing.assert_allclose(
            d.transition_density_generalized(0.5, 1.0, 1.0, x), d.ml_density(0.5, 1.0, x), rtol=1e-10
        )

    def test_golden(self):
        assert d.transition_density_generalized(0.5, 0.5, 1.0, 1.0) == pytest.approx(GENERALIZED_05_05, rel=1e-11)

    def test_normalization(self):
        X = 40.0
        reg, _ = integrate.quad(lambda x: d.transition_density_generalized(0.7, 0.5, 1.0, x), 0.0, X, limit=400)
        assert reg == pytest.approx(d.transition_cdf_generalized(0.7, 0.5, 1.0, X), rel=1e-8)
        assert d.transition_cdf_generalized(0.7, 0.5, 1.0, 1e12) == pytest.approx(1.0, abs=1e-3)

    def test_rejects_mu(self):
        with pytest.raises(ValueError):
            d.transition_density_generalized(0.5, 1.5, 1.0, 1.0)


class TestStateDensity:
    @pytest.mark.parametrize("ab,x,t,expected", STATE_GOLDENS)
    def test_golden(self, ab, x, t, expected):
        p = ProcessParams(alpha=ab[0], beta=ab[1])
        assert d.state_density(p, x, t) == pytest.approx(expected, rel=1e-12)

    def test_initial_condition(self):
        p = ProcessParams(alpha=0.5, beta=0.75)
        assert d.state_density(p, 1.0, 0.0) == 0.0
        g = d.state_density_grid(p, 0.0, 0.1, 10)
        assert g.delta_weight == 1.0 and np.all(g.values == 0)
        assert g.total_mass() == pytest.approx(1.0)

    @pytest.mark.parametrize("ab", [(0.5, 0.75), (0.75, 0.6), (1.0, 0.8), (0.5, 1.0)])
    def test_subordination_matches_series(self, ab):
        p = ProcessParams(alpha=ab[0], beta=ab[1])
        x = np.array([0.3, 1.0, 2.5, 5.0])
        np.testing.assert_allclose(d.state_density(p, x, 1.0), d.state_density_series(p, x, 1.0), rtol=1e-9)

    def test_series_cancellation_raises(self):
        with pytest.raises(ConvergenceError):
            d.state_density_series(ProcessParams(alpha=0.5, beta=0.75), 1.0, 200.0)

    def test_positive_at_large_time(self):
        # the positive form keeps working where the double series cancels
        p = ProcessParams(alpha=0.5, beta=0.75)
        v = d.state_density(p, np.array([0.5, 1.0, 5.0]), 200.0)
        assert np.all(v > 0) and np.all(np.isfinite(v))

    def test_generalized_uses_series(self):
        p = ProcessParams(alpha=0.5, beta=0.5, mu=0.5)
        assert d.state_density(p, 1.0, 1.0) == pytest.approx(d.state_density_series(p, 1.0, 1.0), rel=1e-14)

    @pytest.mark.parametrize(
        "kw,t", [(dict(alpha=0.5, beta=0.5), 1.0), (dict(alpha=0.75, beta=0.75, xi=2.0), 1.0),
                 (dict(alpha=0.5, beta=1.0), 5.0), (dict(alpha=1.0, beta=0.6), 3.0)]
    )
    def test_mass(self, kw, t):
        g = d.state_density_grid(ProcessParams(**kw), t, 0.01, 1000)
        assert g.delta_weight == pytest.approx(float(mittag_leffler(g.meta["beta"], 1.0, -g.meta["xi"] * t ** g.meta["beta"])))
        assert abs(g.total_mass() - 1.0) < 1e-4

    @pytest.mark.parametrize("ab,X", [((0.5, 0.75), 5.0), ((0.75, 1.0), 2.0), ((1.0, 0.6), 1.5)])
    def test_tail_forms_agree(self, ab, X):
        p = ProcessParams(alpha=ab[0], beta=ab[1])
        assert d._tail_mass(p, 1.0, X) == pytest.approx(d._tail_mass_series(p, 1.0, X), rel=1e-10)

    def test_mass_generalized(self):
        g = d.state_density_grid(ProcessParams(alpha=0.5, beta=0.5, mu=0.5), 1.0, 0.02, 250)
        assert abs(g.total_mass() - 1.0) < 1e-3

    @pytest.mark.parametrize("ab", [(0.5, 0.5), (0.75, 0.75), (0.75, 0.9)])
    @pytest.mark.parametrize("x", [0.5, 1.0, 3.0])
    def test_large_time_asymptote(self, ab, x):
        a, b = ab
        t = 1e3
        lhs = d.state_density(ProcessParams(alpha=a, beta=b), x, t) * math.gamma(1.0 - b) * t**b
        assert lhs == pytest.approx(x ** (a - 1.0) / math.gamma(a), rel=0.05)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            d.state_density(ProcessParams(), 1.0, -1.0)


class TestForwardResidual:
    def test_exponential_jumps(self):
        rep = d.forward_equation_residual(ProcessParams(), (1 / 256, 4 * 256), np.linspace(0.0, 1.0, 1025))
        assert rep.relative < 1e-2

    def test_accepts_grid(self):
        g = d.state_density_grid(ProcessParams(), 1.0, 1 / 64, 128)
        rep = d.forward_equation_residual(ProcessParams(), g, np.linspace(0.0, 1.0, 65))
        assert rep.h == g.h and math.isfinite(rep.relative)

    def test_refinement(self):
        rep = d.residual_refinement(ProcessParams(alpha=0.75, beta=0.75), 0.05, 0.05, 4.0, 1.0, t_min=0.25)
        assert rep.passed
        assert rep.ratio >= 1.2

    def test_coarse_warning(self):
        with pytest.warns(RuntimeWarning):
            d.residual_refinement(ProcessParams(), 0.25, 0.25, 2.0, 1.0, min_ratio=100.0)

    def test_time_grid_checks(self):
        p = ProcessParams()
        with pytest.raises(ValueError):
            d.forward_equation_residual(p, (0.1, 10), [0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            d.forward_equation_residual(p, (0.1, 10), [0.0, 0.1, 0.3])
        with pytest.raises(ValueError):
            d.forward_equation_residual(p, (0.1, 10), [0.0, 0.1], t_min=1.0)


class TestPoissonLimit:
    def test_moving_mass(self):
        g = d.poisson_limit_density(1.0, 2.0, 0.1, 40)
        assert g.delta_at == pytest.approx(2.0)
        assert g.total_mass() == pytest.approx(1.0)

    def test_origin(self):
        g = d.poisson_limit_density(3.0, 0.0, 0.1, 10)
        assert g.delta_at == 0.0 and g.delta_weight == 1.0

    @pytest.mark.parametrize("t", [0.0, 0.7, 3.3])
    def test_mass(self, t):
        assert d.poisson_limit_density(1.5, t, 0.05, 200).total_mass() == pytest.approx(1.0)

    def test_rejects(self):
        with pytest.raises(ValueError):
            d.poisson_limit_density(0.0, 1.0, 0.1, 10)


class TestRiemannLiouville:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_power_function(self, alpha):
        errs = []
        for h in (1e-2, 1e-3):
            K = int(round(2.0 / h))
            f = DensityGrid(h, h * np.arange(K + 1))
            D = d.riemann_liouville_frac_derivative(f, alpha)
            x = D.x
            sel = x >= 0.5
            errs.append(np.max(np.abs(D.values[sel] - x[sel] ** (1 - alpha) / math.gamma(2 - alpha))))
        assert errs[1] < 0.2 * errs[0]
        assert errs[1] < 1e-3

    def test_alpha_one_backward_difference(self):
        h = 0.1
        vals = np.sin(h * np.arange(21))
        D = d.riemann_liouville_frac_derivative(DensityGrid(h, vals), 1.0)
        np.testing.assert_allclose(D.values[1:], np.diff(vals) / h, rtol=1e-12, atol=1e-14)

    def test_mittag_leffler_convention(self):
        # RL acting on E_alpha(-x**alpha) Theta(x) keeps the boundary term
        # x**-alpha / Gamma(1-alpha) from f(0+) = 1
        alpha, errs = 0.5, []
        for h in (1e-2, 1e-3):
            K = int(round(1.0 / h))
            x = h * np.arange(K + 1)
            e = 1.0 - np.asarray(d.ml_cdf(alpha, 1.0, x))
            D = d.riemann_liouville_frac_derivative(DensityGrid(h, e), alpha)
            exact = -e[K] + 1.0 / math.gamma(1.0 - alpha)
            errs.append(abs(D.values[K] - exact))
        assert errs[1] < 0.2 * errs[0]

    def test_dirac_term(self):
        h, alpha = 0.1, 0.5
        g = DensityGrid(h, np.zeros(11), delta_weight=1.0)
        D = d.riemann_liouville_frac_derivative(g, alpha)
        np.testing.assert_allclose(D.values[1:], D.x[1:] ** (-1.5) / math.gamma(-0.5), rtol=1e-14)

    def test_rejects(self):
        g = DensityGrid(0.1, np.zeros(4))
        with pytest.raises(ValueError):
            d.riemann_liouville_frac_derivative(g, 1.5)
        with pytest.raises(ValueError):
            d.riemann_liouville_frac_derivative(DensityGrid(0.1, np.zeros(4), 1.0, 0.2), 0.5)


class TestDiscreteDelta:
    def test_values(self):
        h = 0.1
        np.testing.assert_array_equal(d.discrete_delta(h, [-0.01, 0.0, 0.05, 0.1]), [0, 10, 10, 0])

    @pytest.mark.parametrize("s", [0.3, 1.0, 5.0, 40.0])
    def test_laplace_transform(self, s):
        h = 0.1
        q, _ = integrate.quad(lambda x: d.discrete_delta(h, x) * math.exp(-s * x), 0.0, h, epsabs=0, epsrel=1e-13)
        assert abs(q - d.discrete_delta_laplace(h, s)) < 1e-10

    def test_laplace_limit(self):
        s = 2.0
        vals = [d.discrete_delta_laplace(h, s) for h in (1e-1, 1e-3, 1e-6)]
        assert abs(vals[-1] - 1.0) < 1e-5
        assert d.discrete_delta_laplace(0.1, 0.0) == 1.0


class TestSignChanges:
    def test_monotone(self):
        assert d.sign_changes(np.arange(10.0)) == 0

    def test_single_peak(self):
        assert d.sign_changes([0.0, 1.0, 2.0, 1.0, 0.0]) == 1

    def test_oscillation(self):
        assert d.sign_changes(np.sin(np.linspace(0, 4 * np.pi, 200))) == 4

    def test_floor(self):
        assert d.sign_changes([0.0, 1.0, 1.0 - 1e-14, 2.0]) == 0
        assert d.sign_changes([1.0]) == 0
