import numpy as np
import pytest
from scipy import integrate

from ptree.densities import (GBETA_PARAMS, MIX1D_WEIGHTS, MIX2D_WEIGHTS, SCENARIOS,
                             eval_generalized_beta, list_scenarios, sample_generalized_beta,
                             scenario, truncnorm_1d)
from ptree.errors import DomainError, UnknownScenario
from ptree.quadrature import gauss_legendre_grid

from _gof import binned_gof


class TestGeneralizedBeta:
    def test_all_ones_center(self):
        np.testing.assert_allclose(eval_generalized_beta((1,) * 6, 0.5, 0.5), 32 / 27,
                                   rtol=1e-12)

    def test_symmetry(self, rng):
        params = (2.0, 1.5, 3.0, 2.0, 3.0, 2.0)
        x, y = rng.random(50), rng.random(50)
        np.testing.assert_allclose(eval_generalized_beta(params, x, y),
                                   eval_generalized_beta(params, y, x), rtol=1e-13)

    def test_integral(self):
        g = gauss_legendre_grid(64, 8, (0, 0), (1, 1))
        f = eval_generalized_beta((3, 1, 6, 1, 9, 1), g.points[:, 0], g.points[:, 1])
        assert abs(g.integrate(f) - 1.0) < 1e-4

    @pytest.mark.parametrize("x,y", [(0.0, 0.5), (0.5, 1.0), (1.0, 1.0)])
    def test_boundary(self, x, y):
        with pytest.raises(DomainError):
            eval_generalized_beta((1,) * 6, x, y)

    def test_marginal_mean(self):
        x = sample_generalized_beta((1,) * 6, 100_000, 3)
        se = x[:, 0].std(ddof=1) / np.sqrt(x.shape[0])
        assert abs(x[:, 0].mean() - 0.5) < 3 * se

    def test_seeded(self):
        np.testing.assert_array_equal(sample_generalized_beta(GBETA_PARAMS["gbeta2"], 100, 8),
                                      sample_generalized_beta(GBETA_PARAMS["gbeta2"], 100, 8))


class TestRegistry:
    def test_gbeta1_params(self):
        assert scenario("gbeta1").params["gbeta"] == (50, 1, 100, 1, 150, 1)

    def test_mixture_weights(self):
        assert scenario("mix1d").weights == (0.1, 0.2, 0.2, 0.3, 0.2) == MIX1D_WEIGHTS
        assert scenario("mix2d_1").weights == MIX2D_WEIGHTS
        assert sum(MIX2D_WEIGHTS) == 1.0

    def test_unknown(self):
        with pytest.raises(UnknownScenario):
            scenario("beta7_3")

    def test_listing(self):
        assert [n for n, _ in list_scenarios()] == list(SCENARIOS)
        assert {d for _, d in list_scenarios()} == {1, 2}

    def test_truncated_normal_integral(self):
        tn = truncnorm_1d(0.5, 0.1, 0.1, 0.9)
        val, _ = integrate.quad(tn.pdf, 0.1, 0.9, epsabs=1e-13, epsrel=1e-13)
        assert abs(val - 1.0) < 1e-8
        assert tn.pdf(0.05) == 0.0


@pytest.mark.parametrize("name", SCENARIOS)
def test_pdf_integrates_to_one(name):
    s = scenario(name)
    d = s.dimension
    g = gauss_legendre_grid(4096 if d == 1 else 256, 8, (0.0,) * d, (1.0,) * d)
    f = s.pdf(g.points)
    assert np.all(f >= 0)
    assert abs(g.integrate(f) - 1.0) < 1e-6


@pytest.mark.parametrize("name", SCENARIOS)
def test_sampler_matches_pdf(name):
    s = scenario(name)
    p, _, _ = binned_gof(s, bins=32 if s.dimension == 2 else 200, seed=1)
    assert p > 1e-3


@pytest.mark.parametrize("name", SCENARIOS)
def test_samples_inside_domain_and_seeded(name):
    s = scenario(name)
    x = s.sample(2000, 5)
    assert x.shape == (2000, s.dimension)
    assert np.all((x >= 0) & (x <= 1))
    np.testing.assert_array_equal(x, s.sample(2000, 5))
