import math

import numpy as np
import pytest

from sgn.processes import (
    AR1,
    ARCH1,
    ARMA11,
    Damped,
    Harmonic,
    JumpDiffusion,
    Logistic,
    Lorenz,
    OU,
    SeriesF,
    default_spec,
    generate,
    rk4_step,
)
from sgn.rng import RngStream

RNG = RngStream(12345)


class TestClosedForms:
    def test_harmonic_cosine(self):
        series = generate(Harmonic(a=1.0, y0=1.0, v0=0.0), 3, dt=math.pi / 2)
        np.testing.assert_allclose(series.values, [1.0, 0.0, -1.0], atol=1e-12)

    def test_logistic_chaotic_fixed_points(self):
        series = generate(Logistic(r=4.0, x0=0.5), 3)
        np.testing.assert_array_equal(series.values, [0.5, 1.0, 0.0])

    def test_ou_noise_free_step(self):
        series = generate(OU(theta=0.1, mu=0.0, sigma=0.0, x0=1.0), 2, dt=1.0, rng=RNG)
        np.testing.assert_allclose(series.values, [1.0, math.exp(-0.1)], rtol=1e-15)

    def test_ar1_deterministic_recursion(self):
        series = generate(AR1(phi=0.5, c=1.0, sigma_eps=0.0, x0=0.0), 4, rng=RNG)
        np.testing.assert_array_equal(series.values, [0.0, 1.0, 1.5, 1.75])

    def test_jump_diffusion_reduces_to_exponential_growth(self):
        spec = JumpDiffusion(alpha=0.05, lam=0.0, sigma=0.0, x0=1.0)
        series = generate(spec, 2, dt=1.0, rng=RNG)
        np.testing.assert_allclose(series.values, [1.0, math.exp(0.05)], rtol=1e-15)


class TestRk4:
    def test_zero_field(self):
        out = rk4_step(np.array([1.0]), lambda s: np.zeros_like(s), 0.1)
        np.testing.assert_array_equal(out, [1.0])

    def test_exponential(self):
        out = rk4_step(np.array([1.0]), lambda s: s, 0.1)
        assert abs(out[0] - math.exp(0.1)) < 1e-7

    def test_lorenz_attractor_bounded(self):
        spec = Lorenz(sigma=10.0, rho=28.0, beta=8.0 / 3.0, init=(1.0, 1.0, 1.0))
        series = generate(spec, 10000, dt=0.01)
        assert np.abs(series.values).max() < 25.0
        # Oracle: a 10x finer integration stays bounded too and agrees over
        # a short horizon (before chaotic divergence).
        fine = generate(spec, 1001, dt=0.001)
        assert np.abs(fine.values).max() < 25.0
        np.testing.assert_allclose(series.values[:100], fine.values[::10][:100], atol=1e-3)


class TestStochasticStatistics:
    def test_ou_stationary_variance(self):
        series = generate(OU(theta=0.1, mu=0.0, sigma=0.2, x0=0.0), 100000, dt=1.0,
                          rng=RngStream(2024))
        target = 0.2**2 / (2 * 0.1)
        assert abs(series.values.var() - target) / target < 0.05

    def test_ou_long_run_mean(self):
        theta, sigma = 0.1, 0.2
        n = 10**6
        series = generate(OU(theta=theta, mu=0.0, sigma=sigma, x0=0.0), n, dt=1.0,
                          rng=RngStream(7))
        phi = math.exp(-theta)
        sd = sigma / math.sqrt(2 * theta)
        se = sd * math.sqrt((1 + phi) / (1 - phi) / n)
        assert abs(series.values.mean()) < 3 * se

    def test_arch_without_feedback_has_variance_c(self):
        series = generate(ARCH1(c=1.0, phi1=0.0, x0=0.0), 100000, rng=RngStream(5))
        assert abs(series.values[1:].var() - 1.0) < 0.05


class TestDeterminismAndEquivalences:
    @pytest.mark.parametrize("spec", [
        OU(), JumpDiffusion(), AR1(), ARMA11(), ARCH1(),
    ])
    def test_equal_seeds_bit_identical(self, spec):
        a = generate(spec, 500, dt=1.0, rng=RngStream(11, 3))
        b = generate(spec, 500, dt=1.0, rng=RngStream(11, 3))
        np.testing.assert_array_equal(a.values, b.values)

    @pytest.mark.parametrize("spec", [Harmonic(), Damped(), Logistic(), Lorenz()])
    def test_deterministic_variants_ignore_seed(self, spec):
        a = generate(spec, 200, dt=0.05, rng=RngStream(1))
        b = generate(spec, 200, dt=0.05, rng=RngStream(999))
        np.testing.assert_array_equal(a.values, b.values)

    def test_damped_without_damping_equals_harmonic(self):
        damped = generate(Damped(a=2.0, b=0.0, y0=1.0, v0=0.5), 300, dt=0.05)
        harm = generate(Harmonic(a=2.0, y0=1.0, v0=0.5), 300, dt=0.05)
        np.testing.assert_allclose(damped.values, harm.values, atol=1e-12)

    def test_arma_without_ma_term_equals_ar1(self):
        ar = generate(AR1(phi=0.7, c=0.3, sigma_eps=1.0, x0=0.0), 1000, rng=RngStream(8))
        arma = generate(ARMA11(phi=0.7, theta_ma=0.0, c=0.3, sigma_eps=1.0, x0=0.0),
                        1000, rng=RngStream(8))
        np.testing.assert_array_equal(ar.values, arma.values)


class TestValidation:
    @pytest.mark.parametrize("bad", [
        lambda: Harmonic(a=0.0),
        lambda: Damped(b=-1.0),
        lambda: Logistic(r=4.5),
        lambda: Logistic(x0=0.0),
        lambda: OU(theta=0.0),
        lambda: JumpDiffusion(lam=-1.0),
        lambda: JumpDiffusion(x0=0.0),
        lambda: AR1(sigma_eps=-1.0),
        lambda: ARCH1(c=0.0),
        lambda: ARCH1(phi1=1.0),
    ])
    def test_parameter_ranges(self, bad):
        with pytest.raises(ValueError):
            bad()

    def test_n_and_dt_validation(self):
        with pytest.raises(ValueError):
            generate(Harmonic(), 0)
        with pytest.raises(ValueError):
            generate(Harmonic(), 10, dt=0.0)
        with pytest.raises(ValueError):
            generate(AR1(), 10)  # stochastic without rng

    def test_series_invariants(self):
        with pytest.raises(ValueError):
            SeriesF(values=np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            SeriesF(values=np.array([]), dt=1.0)

    def test_default_spec_by_name(self):
        spec = default_spec("ou", {"theta": 0.25})
        assert isinstance(spec, OU) and spec.theta == 0.25
        with pytest.raises(ValueError):
            default_spec("nosuch")
