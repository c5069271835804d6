import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from sgn.inference import (
    EstimationError,
    FitResult,
    arch1_loglik,
    arma11_css,
    fit_ar1,
    fit_arch1,
    fit_arma11,
    fit_ou,
    ks_distance,
    monte_carlo_report,
    true_parameters,
)
from sgn.processes import AR1, ARCH1, ARMA11, OU, generate
from sgn.rng import RngStream


class TestFitAr1:
    def test_exact_line(self):
        # x_t = 1 + 1 * x_{t-1} exactly: slope 1, intercept 1, zero residual.
        fit = fit_ar1(np.arange(1.0, 13.0))
        assert fit.converged
        assert fit.estimates["phi"] == pytest.approx(1.0, abs=1e-10)
        assert fit.estimates["c"] == pytest.approx(1.0, abs=1e-10)
        assert fit.estimates["sigma_eps"] == pytest.approx(0.0, abs=1e-7)

    def test_recovery_within_three_se(self):
        n = 20000
        spec = AR1(phi=0.7, c=0.5, sigma_eps=1.0)
        series = generate(spec, n, rng=RngStream(100))
        fit = fit_ar1(series)
        se_phi = math.sqrt((1 - 0.7**2) / n)
        mu = 0.5 / (1 - 0.7)
        se_c = 1.0 * math.sqrt((1 + mu**2 * (1 - 0.7**2))) / math.sqrt(n)
        assert abs(fit.estimates["phi"] - 0.7) < 3 * se_phi
        assert abs(fit.estimates["c"] - 0.5) < 3 * se_c
        assert abs(fit.estimates["sigma_eps"] - 1.0) < 3 / math.sqrt(2 * n)

    def test_affine_equivariance(self):
        series = generate(AR1(phi=0.5, c=0.0, sigma_eps=1.0), 500, rng=RngStream(7))
        base = fit_ar1(series)
        scaled = fit_ar1(3.0 * series.values + 2.0)
        # y = 3x + 2 follows AR(1) with the same slope, c' = 3c + 2(1-phi),
        # sigma' = 3 sigma.
        assert scaled.estimates["phi"] == pytest.approx(base.estimates["phi"], abs=1e-9)
        assert scaled.estimates["c"] == pytest.approx(
            3 * base.estimates["c"] + 2 * (1 - base.estimates["phi"]), abs=1e-8)
        assert scaled.estimates["sigma_eps"] == pytest.approx(
            3 * base.estimates["sigma_eps"], rel=1e-9)

    def test_constant_series_not_converged(self):
        fit = fit_ar1(np.full(50, 2.0))
        assert not fit.converged

    def test_too_short(self):
        with pytest.raises(ValueError):
            fit_ar1(np.zeros(5))


class TestFitArma11:
    def test_css_zero_at_truth_for_noise_free_recursion(self):
        # Build x_t = 0.2 + 0.6 x_{t-1} + eps_t + 0.3 eps_{t-1} with known eps,
        # eps_0 = 0 so the conditional recursion recovers them exactly.
        g = RngStream(11).generator()
        eps = g.standard_normal(400)
        eps[0] = 0.0
        x = np.zeros(400)
        for t in range(1, 400):
            x[t] = 0.2 + 0.6 * x[t - 1] + eps[t] + 0.3 * eps[t - 1]
        assert arma11_css(x, 0.6, 0.3, 0.2) == pytest.approx(float(eps[1:] @ eps[1:]), rel=1e-10)

    def test_css_ar1_special_case(self):
        x = np.array([0.0, 1.0, 0.5, 2.0, -1.0])
        u = x[1:] - 0.1 - 0.7 * x[:-1]
        assert arma11_css(x, 0.7, 0.0, 0.1) == pytest.approx(float(u @ u), rel=1e-12)

    def test_theta_zero_data(self):
        series = generate(AR1(phi=0.7, c=0.0, sigma_eps=1.0), 5000, rng=RngStream(12))
        fit = fit_arma11(series)
        assert fit.converged
        assert abs(fit.estimates["phi"] - 0.7) < 0.1
        assert abs(fit.estimates["theta_ma"]) < 0.1

    def test_recovery(self):
        series = generate(ARMA11(phi=0.7, theta_ma=0.3, c=0.0, sigma_eps=1.0),
                          10000, rng=RngStream(13))
        fit = fit_arma11(series)
        assert fit.converged
        assert abs(fit.estimates["phi"] - 0.7) < 0.1
        assert abs(fit.estimates["theta_ma"] - 0.3) < 0.1
        assert abs(fit.estimates["c"]) < 0.1
        assert abs(fit.estimates["sigma_eps"] - 1.0) < 0.05


class TestFitArch1:
    def test_loglik_example(self):
        x = np.array([1.0, 2.0, -1.0])
        # h2 = [c + phi*1, c + phi*4] with c=0.5, phi=0.25 -> [0.75, 1.5]
        expected = -0.5 * (math.log(0.75) + 4.0 / 0.75 + math.log(1.5) + 1.0 / 1.5)
        assert arch1_loglik(x, 0.5, 0.25) == pytest.approx(expected, rel=1e-12)

    def test_loglik_rejects_nonpositive_variance(self):
        assert arch1_loglik(np.array([1.0, 1.0]), -2.0, 0.5) == -math.inf

    def test_iid_data_gives_small_phi1(self):
        x = RngStream(14).generator().standard_normal(8000) * 1.3
        fit = fit_arch1(x)
        assert fit.converged
        assert fit.estimates["phi1"] < 0.08
        assert abs(fit.estimates["c"] - 1.3**2) < 0.15

    def test_recovery(self):
        series = generate(ARCH1(c=1.0, phi1=0.5), 10000, rng=RngStream(15))
        fit = fit_arch1(series)
        assert fit.converged
        assert abs(fit.estimates["phi1"] - 0.5) < 0.1
        assert abs(fit.estimates["c"] - 1.0) < 0.15

    def test_constant_zero_not_converged(self):
        fit = fit_arch1(np.zeros(200))
        assert not fit.converged


class TestFitOu:
    def test_exact_map_from_ar1(self):
        # A noiseless check of the inversion arithmetic: feed data whose AR(1)
        # fit is exact, then verify the closed-form parameter mapping.
        dt = 0.5
        theta, mu = 0.4, 2.0
        phi = math.exp(-theta * dt)
        x = np.empty(60)
        x[0] = 5.0
        for t in range(1, 60):
            x[t] = mu * (1 - phi) + phi * x[t - 1]
        fit = fit_ou(x, dt=dt)
        assert fit.converged
        assert fit.estimates["theta"] == pytest.approx(theta, rel=1e-6)
        assert fit.estimates["mu"] == pytest.approx(mu, rel=1e-6)

    def test_recovery(self):
        spec = OU(theta=0.1, mu=0.0, sigma=0.2)
        series = generate(spec, 20000, dt=1.0, rng=RngStream(16))
        fit = fit_ou(series, dt=1.0)
        assert fit.converged
        assert 0.06 <= fit.estimates["theta"] <= 0.15
        assert abs(fit.estimates["mu"]) < 0.2
        assert abs(fit.estimates["sigma"] - 0.2) < 0.02

    def test_explosive_series_not_converged(self):
        x = 1.05 ** np.arange(200)
        fit = fit_ou(x, dt=1.0)
        assert not fit.converged

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            fit_ou(np.zeros(50), dt=0.0)


class TestMonteCarloReport:
    def make_fits(self, phis):
        return [FitResult("ar1", {"phi": p, "c": 0.0, "sigma_eps": 1.0},
                          converged=True, loglik_or_ssr=0.0) for p in phis]

    def test_median_odd(self):
        report = monte_carlo_report(self.make_fits([0.5, 0.9, 0.7]), AR1(phi=0.7))
        assert report.parameters["phi"]["median"] == 0.7
        assert report.parameters["phi"]["true"] == 0.7
        assert report.num_converged == 3

    def test_median_even_midpoint(self):
        report = monte_carlo_report(self.make_fits([0.4, 0.6, 0.8, 1.0]), AR1(phi=0.7))
        assert report.parameters["phi"]["median"] == pytest.approx(0.7)

    def test_quantiles(self):
        report = monte_carlo_report(self.make_fits(np.linspace(0.0, 1.0, 101)), AR1())
        q = report.parameters["phi"]["quantiles"]
        assert q["0.05"] == pytest.approx(0.05)
        assert q["0.95"] == pytest.approx(0.95)

    def test_non_converged_filtered(self):
        fits = self.make_fits([0.1, 0.9]) + [
            FitResult("ar1", {}, converged=False, loglik_or_ssr=math.inf)]
        report = monte_carlo_report(fits, AR1())
        assert report.num_sims == 3
        assert report.num_converged == 2
        assert report.parameters["phi"]["median"] == pytest.approx(0.5)

    def test_all_diverged_raises(self):
        fits = [FitResult("ar1", {}, converged=False, loglik_or_ssr=math.inf)]
        with pytest.raises(EstimationError):
            monte_carlo_report(fits, AR1())

    def test_true_parameters(self):
        assert true_parameters(ARMA11(phi=0.7, theta_ma=0.3)) == {
            "phi": 0.7, "theta_ma": 0.3, "c": 0.0, "sigma_eps": 1.0}

    def test_roundtrip_dict(self):
        report = monte_carlo_report(self.make_fits([0.6, 0.8]), AR1())
        d = report.to_dict()
        assert d["num_sims"] == 2 and "phi" in d["parameters"]


class TestKsDistance:
    def test_identical_samples(self):
        x = np.array([1.0, 2.0, 3.0])
        assert ks_distance(x, x) == 0.0

    def test_disjoint_samples(self):
        assert ks_distance([0.0, 1.0], [5.0, 6.0]) == 1.0

    def test_hand_example(self):
        # F_a steps at 1, 2; F_b steps at 1.5. The largest gap is 1/2 at x=1.
        assert ks_distance([1.0, 2.0], [1.5]) == pytest.approx(0.5)

    def test_matches_scipy(self):
        g = RngStream(17).generator()
        a = g.standard_normal(400)
        b = g.standard_normal(300) + 0.2
        assert ks_distance(a, b) == pytest.approx(ks_2samp(a, b).statistic, abs=1e-12)

    def test_symmetry_and_monotone_invariance(self):
        g = RngStream(18).generator()
        a, b = g.random(100), g.random(80)
        d = ks_distance(a, b)
        assert ks_distance(b, a) == d
        assert ks_distance(np.exp(a), np.exp(b)) == pytest.approx(d, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_distance([], [1.0])
