import math

import numpy as np
import pytest
from scipy import integrate as quad_integrate
from scipy import stats

from pppbayes.gp_prior import (
    FactorizationError,
    draw_rescaling,
    GpPriorSpec,
    jittered_cholesky,
    latent_operator,
    log_rescaling_density,
    prior_draw_intensity,
    riemann_liouville_operator,
    sample_latent,
    sample_rescaled_field,
    sample_riemann_liouville,
    squared_exponential_gram,
)
from pppbayes.grid import make_grid
from pppbayes.link import LinkSpec, apply_link, invert_link


def mc_draws(op, n, seed):
    return np.random.default_rng(seed).standard_normal((n, op.shape[1])) @ op.T


class TestRiemannLiouville:
    def test_value_at_zero_is_eta0(self):
        op = riemann_liouville_operator([0.0], 1.7, 512)
        expected = np.zeros(op.shape[1])
        expected[0] = 1.0
        np.testing.assert_array_equal(op[0], expected)

    def test_polynomial_degree(self):
        assert riemann_liouville_operator([0.3], 2.5, 16).shape[1] == 3 + 16
        assert riemann_liouville_operator([0.3], 0.5, 16).shape[1] == 1 + 16

    def test_brownian_variance(self):
        op = riemann_liouville_operator([0.5], 0.5, 512)[:, 1:]
        w = mc_draws(op, 20_000, 1)[:, 0]
        var = w.var(ddof=1)
        assert abs(var - 0.5) < 3 * 0.5 * math.sqrt(2 / 20_000)

    def test_three_halves_variance(self):
        op = riemann_liouville_operator([1.0], 1.5, 512)[:, 2:]
        w = mc_draws(op, 20_000, 2)[:, 0]
        assert abs(w.var(ddof=1) - 1 / 3) < 3 * (1 / 3) * math.sqrt(2 / 20_000)

    def test_polynomial_covariance(self):
        x = np.array([0.2, 0.7])
        op = riemann_liouville_operator(x, 2.3, 64)[:, :3]
        draws = mc_draws(op, 20_000, 3)
        prod = draws[:, 0] * draws[:, 1]
        exact = sum((x[0] * x[1]) ** k for k in range(3))
        assert abs(prod.mean() - exact) < 4 * prod.std(ddof=1) / math.sqrt(len(prod))

    def test_integral_covariance_against_quadrature(self):
        beta, x1, x2 = 1.0, 0.4, 0.9
        op = riemann_liouville_operator([x1, x2], beta, 4096)[:, 2:]
        exact, _ = quad_integrate.quad(lambda y: (x1 - y) ** (beta - 0.5) * (x2 - y) ** (beta - 0.5), 0, x1)
        draws = mc_draws(op, 20_000, 4)
        prod = draws[:, 0] * draws[:, 1]
        assert abs(prod.mean() - exact) < 4 * prod.std(ddof=1) / math.sqrt(len(prod))
        # the operator's own covariance converges to the quadrature value
        assert float(op[0] @ op[1]) == pytest.approx(exact, rel=2e-3)

    def test_substep_refinement_ks(self):
        g = make_grid(1, 32)
        a = latent_operator(GpPriorSpec(hurst_beta=1.0, integration_substeps=8), g)
        b = latent_operator(GpPriorSpec(hurst_beta=1.0, integration_substeps=16), g)
        wa, wb = mc_draws(a, 4000, 5)[:, -1], mc_draws(b, 4000, 6)[:, -1]
        assert stats.ks_2samp(wa, wb).pvalue > 0.01

    def test_needs_1d(self):
        with pytest.raises(ValueError):
            sample_riemann_liouville(GpPriorSpec(), make_grid(2, 4), 0)

    def test_deterministic(self):
        g = make_grid(1, 16)
        a = sample_riemann_liouville(GpPriorSpec(), g, 9).values
        np.testing.assert_array_equal(a, sample_riemann_liouville(GpPriorSpec(), g, 9).values)


class TestRescaledField:
    def test_unit_marginal_variance(self):
        g = make_grid(1, 8)
        op = latent_operator(GpPriorSpec(kind="rescaled_field", fixed_a=2.0), g)
        draws = mc_draws(op, 20_000, 1)
        var = draws.var(axis=0, ddof=1)
        assert np.all(np.abs(var - 1) < 3 * math.sqrt(2 / 20_000) * 1.5)

    def test_degenerate_a_gives_constant(self):
        g = make_grid(1, 16)
        w = sample_rescaled_field(GpPriorSpec(kind="rescaled_field", fixed_a=0.0), g, 3).values
        assert np.ptp(w) < 1e-3 * max(1.0, abs(w[0]))

    def test_correlation_at_half(self):
        g = make_grid(1, 2)  # nodes 0.25 and 0.75
        op = latent_operator(GpPriorSpec(kind="rescaled_field", fixed_a=1.0, base_kernel_scale=1.0), g)
        draws = mc_draws(op, 20_000, 2)
        r = np.corrcoef(draws.T)[0, 1]
        se = (1 - r**2) / math.sqrt(20_000)
        assert abs(r - math.exp(-0.25)) < 3 * se

    def test_covariance_entrywise(self):
        g = make_grid(2, 3)
        spec = GpPriorSpec(kind="rescaled_field", fixed_a=2.0, base_kernel_scale=1.5)
        draws = mc_draws(latent_operator(spec, g), 20_000, 3)
        gram = squared_exponential_gram(g.nodes, 2.0, 1.5)
        prods = draws[:, :, None] * draws[:, None, :]
        se = prods.std(axis=0, ddof=1) / math.sqrt(len(draws))
        assert np.all(np.abs(prods.mean(axis=0) - gram) < 4 * se + 1e-12)

    def test_random_a_law(self):
        spec = GpPriorSpec(kind="rescaled_field", gamma_shape=2.0, gamma_rate=3.0)
        rng = np.random.default_rng(4)
        t = np.array([draw_rescaling(spec, 2, rng) ** 2 for _ in range(5000)])
        assert stats.kstest(t, stats.gamma(2.0, scale=1 / 3).cdf).pvalue > 0.01

    def test_log_density_normalised(self):
        spec = GpPriorSpec(kind="rescaled_field", gamma_shape=1.5, gamma_rate=0.7)
        for dim in (1, 2):
            total, _ = quad_integrate.quad(lambda u: math.exp(log_rescaling_density(spec, dim, u)), -30, 10)
            assert total == pytest.approx(1.0, abs=1e-6)

    def test_jitter_escalation_fails_for_indefinite(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(FactorizationError):
            jittered_cholesky(bad)

    def test_works_in_2d(self):
        w = sample_latent(GpPriorSpec(kind="rescaled_field"), make_grid(2, 6), 1)
        assert w.values.shape == (36,)


class TestPriorIntensity:
    def test_shifted_abs_floor(self):
        g = make_grid(1, 32)
        for seed in range(20):
            lam = prior_draw_intensity(GpPriorSpec(), LinkSpec("shifted_abs", 0.1), g, seed)
            assert lam.values.min() >= 0.1

    def test_logistic_range(self):
        g = make_grid(1, 32)
        for seed in range(20):
            lam = prior_draw_intensity(GpPriorSpec(kind="rescaled_field"), LinkSpec("logistic_variant", 0.0, 5.0), g, seed)
            assert lam.values.min() > 0 and lam.values.max() < 5

    def test_round_trip(self):
        g = make_grid(1, 32)
        link = LinkSpec()
        w = sample_latent(GpPriorSpec(), g, 7)
        back = invert_link(link, apply_link(link, w))
        np.testing.assert_allclose(back.values, w.values, atol=1e-10)


def test_spec_validation():
    with pytest.raises(ValueError):
        GpPriorSpec(hurst_beta=0)
    with pytest.raises(ValueError):
        GpPriorSpec(kind="matern")
    with pytest.raises(ValueError):
        GpPriorSpec(gamma_rate=-1)
