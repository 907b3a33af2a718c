import math

import numpy as np
import pytest

from phasebound.engine import OutcomeTally
from phasebound.estimate import (
    ConstantEstimator,
    DegeneratePosteriorError,
    MaximumLikelihoodEstimator,
    PosteriorMeanEstimator,
    PosteriorModeEstimator,
    bias_derivative_fd,
    build_posterior,
    frequentist_risk,
    mle,
    mle_asymptotic_density,
    posterior_map,
    posterior_mean,
    posterior_table,
    posterior_variance,
)
from phasebound.model import tally_probability
from phasebound.numerics import family45_prior, integrate

# analytic values for the flat-prior single-shot (+1) posterior (4/pi) cos^2:
FLAT11_DENSITY_AT_ZERO = 4 / math.pi                 # 1.2732395447351628
FLAT11_MEAN = math.pi / 4 - 1 / math.pi              # 0.46708827721365764
FLAT11_VARIANCE = 0.10429557471369053                # pi^2/12 - 1/2 - mean^2


class TestMle:
    def test_balanced_tally(self, model, domain):
        assert mle(OutcomeTally(5, 10), model, domain) == pytest.approx(math.pi / 4, abs=1e-15)

    def test_all_plus(self, model, domain):
        assert mle(OutcomeTally(10, 10), model, domain) == 0.0

    def test_three_of_four(self, model, domain):
        assert mle(OutcomeTally(3, 4), model, domain) == pytest.approx(math.pi / 6, abs=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3, 6])
    def test_maximises_tally_probability(self, model, domain, m):
        thetas = np.linspace(domain.a, domain.b, 20_001)
        for k in range(m + 1):
            probs = tally_probability(model, thetas, m, k)
            grid_argmax = thetas[int(np.argmax(probs))]
            assert mle(OutcomeTally(k, m), model, domain) == pytest.approx(
                grid_argmax, abs=2 * (domain.b - domain.a) / 20_000)


class TestPosteriorConstruction:
    def test_flat_single_shot_density(self, model, flat):
        post = build_posterior(flat, OutcomeTally(1, 1), model)
        assert post.density[0] == pytest.approx(FLAT11_DENSITY_AT_ZERO, abs=1e-9)
        assert post.density[-1] == pytest.approx(0.0, abs=1e-15)
        assert post.marginal == pytest.approx(0.5, abs=1e-12)

    def test_no_data_returns_prior(self, model, flat):
        post = build_posterior(flat, OutcomeTally(0, 0), model)
        np.testing.assert_allclose(post.density, flat.values, atol=1e-14)

    def test_vanishing_prior_vanishes_in_posterior(self, model, grid):
        prior = family45_prior(10.0, grid)
        post = build_posterior(prior, OutcomeTally(1, 1), model)
        assert post.density[0] == 0.0
        assert abs(post.density[-1]) < 1e-12

    @pytest.mark.parametrize("m", [1, 5, 11, 17, 24, 33, 42, 50])
    def test_normalisation_battery(self, model, grid, flat, m):
        for prior in (flat, family45_prior(-100.0, grid), family45_prior(-10.0, grid),
                      family45_prior(1.0, grid), family45_prior(10.0, grid)):
            dens, _, marg = posterior_table(prior, m, model)
            norms = dens @ grid.weights
            assert float(np.max(np.abs(norms - 1.0))) < 1e-9
            assert abs(marg.sum() - 1.0) < 1e-9

    def test_derivative_consistency(self, model, flat, grid):
        post = build_posterior(flat, OutcomeTally(3, 5), model)
        inner = slice(1, -1)
        fd = np.gradient(post.density, grid.nodes)
        np.testing.assert_allclose(post.density_derivative[inner], fd[inner],
                                   rtol=5e-3, atol=1e-4)


class TestPosteriorSummaries:
    def test_single_shot_mean(self, model, flat):
        post = build_posterior(flat, OutcomeTally(1, 1), model)
        assert posterior_mean(post) == pytest.approx(FLAT11_MEAN, abs=1e-10)

    def test_single_shot_variance(self, model, flat):
        post = build_posterior(flat, OutcomeTally(1, 1), model)
        assert posterior_variance(post) == pytest.approx(FLAT11_VARIANCE, abs=1e-10)

    def test_symmetric_posterior_mean(self, model, flat):
        post = build_posterior(flat, OutcomeTally(2, 4), model)
        assert posterior_mean(post) == pytest.approx(math.pi / 4, abs=1e-12)

    def test_variance_minimal_at_mean(self, model, flat):
        post = build_posterior(flat, OutcomeTally(2, 7), model)
        v0 = posterior_variance(post)
        for center in (0.3, 0.5, 1.0):
            assert posterior_variance(post, center) >= v0 - 1e-15

    def test_parallel_axis_identity(self, model, flat):
        post = build_posterior(flat, OutcomeTally(2, 7), model)
        mu, v0 = posterior_mean(post), posterior_variance(post)
        c = 0.9
        assert posterior_variance(post, c) == pytest.approx(v0 + (c - mu) ** 2, abs=1e-12)

    def test_map_equals_mle_for_flat_prior(self, model, flat, domain):
        # gridded MAP agrees with the analytic MLE to one grid cell, every
        # tally up to m = 50
        cell = (domain.b - domain.a) / (flat.grid.node_count - 1)
        for m in range(1, 51):
            dens, _, _ = posterior_table(flat, m, model)
            maps = flat.grid.nodes[np.argmax(dens, axis=1)]
            for k in range(m + 1):
                assert abs(maps[k] - mle(OutcomeTally(k, m), model, domain)) <= cell

    def test_map_tie_breaks_to_smallest_node(self, model, flat):
        post = build_posterior(flat, OutcomeTally(0, 0), model)  # constant density
        assert posterior_map(post) == flat.grid.nodes[0]


class TestFrequentistRisk:
    def test_mle_unbiased_at_symmetry_point(self, model, domain):
        est = MaximumLikelihoodEstimator(model, domain)
        for m in (1, 7, 30, 100):
            risk = frequentist_risk(est, math.pi / 4, m, model)
            assert abs(risk.mean - math.pi / 4) < 1e-12

    def test_variance_mse_bias_identity(self, model, domain, grid, flat):
        estimators = [
            MaximumLikelihoodEstimator(model, domain),
            PosteriorMeanEstimator(model, flat),
            PosteriorModeEstimator(model, family45_prior(1.0, grid)),
        ]
        cells = [(0.3, 1), (0.3, 4), (math.pi / 4, 2), (math.pi / 4, 9),
                 (1.1, 3), (1.1, 16), (0.8, 25)]
        for est in estimators:
            for theta0, m in cells:
                risk = frequentist_risk(est, theta0, m, model)
                assert risk.mse == pytest.approx(
                    risk.variance + (risk.mean - theta0) ** 2, abs=1e-12)

    def test_zero_bias_makes_mse_equal_variance(self, model, domain):
        est = MaximumLikelihoodEstimator(model, domain)
        risk = frequentist_risk(est, math.pi / 4, 12, model)
        assert risk.mse == pytest.approx(risk.variance, abs=1e-12)

    def test_scaled_variance_approaches_crlb(self, model, domain):
        est = MaximumLikelihoodEstimator(model, domain)
        risk = frequentist_risk(est, math.pi / 4, 200, model)
        assert 200 * 4 * risk.variance == pytest.approx(1.0, rel=0.05)

    def test_bias_derivative_against_finite_differences(self, model, domain, flat):
        for est in (MaximumLikelihoodEstimator(model, domain),
                    PosteriorMeanEstimator(model, flat)):
            for theta0, m in ((math.pi / 4, 10), (0.6, 25)):
                analytic = frequentist_risk(est, theta0, m, model).bias_derivative
                fd = bias_derivative_fd(est, theta0, m, model)
                assert analytic == pytest.approx(fd, rel=1e-6)

    def test_bias_derivative_trend_to_one(self, model, domain):
        est = MaximumLikelihoodEstimator(model, domain)
        gaps = [abs(frequentist_risk(est, math.pi / 4, m, model).bias_derivative - 1.0)
                for m in (10, 100, 1000)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_constant_estimator(self, model):
        est = ConstantEstimator(0.5)
        risk = frequentist_risk(est, 0.7, 9, model)
        assert risk.variance == pytest.approx(0.0, abs=1e-30)
        assert risk.mse == pytest.approx(0.04, abs=1e-15)
        assert risk.bias_derivative == pytest.approx(0.0, abs=1e-14)

    def test_estimates_stay_in_domain(self, model, grid):
        prior = family45_prior(-100.0, grid)
        est = PosteriorMeanEstimator(model, prior)
        for m in (1, 6):
            v = est.values(m)
            assert np.all(v >= 0.0) and np.all(v <= math.pi / 2)


class TestAsymptoticDensity:
    def test_variance_value(self, model):
        g = mle_asymptotic_density(math.pi / 4, 100, model)
        assert g.variance == pytest.approx(0.0025, abs=1e-15)
        assert g.mean == pytest.approx(math.pi / 4)

    def test_variance_halves_when_m_doubles(self, model):
        v1 = mle_asymptotic_density(0.5, 50, model).variance
        v2 = mle_asymptotic_density(0.5, 100, model).variance
        assert v1 == pytest.approx(2 * v2, rel=1e-12)

    def test_total_mass(self, model, grid):
        g = mle_asymptotic_density(math.pi / 4, 100, model)
        assert integrate(g.density(grid.nodes), grid) == pytest.approx(1.0, abs=1e-9)


class TestDegeneracy:
    def test_zero_likelihood_region(self, model, grid):
        # prior supported where the likelihood of k=m vanishes entirely
        from phasebound.numerics import custom_prior
        values = np.where(grid.nodes > math.pi / 2 - 1e-4, 1.0, 0.0)
        prior = custom_prior(grid, values)
        with pytest.raises(DegeneratePosteriorError):
            build_posterior(prior, OutcomeTally(40, 40), model)
