import math

import numpy as np
import pytest
from scipy.special import betaln

from ptree.base import BaseMeasure, Marginal
from ptree.densities import scenario
from ptree.errors import InvalidPrior
from ptree.partition import Dataset, build_fixed_tree, build_partial_tree
from ptree.polya import (BetaNodePrior, PriorSpec, bayes_factor, node_marginal,
                         posterior_branch_mean, precompute_beta_grid, predictive_density,
                         sample_posterior_density)

from _oracles import beta_binomial_log_ratio


@pytest.fixture
def prior1(unit1):
    return PriorSpec(unit1, 2.0)


def _three():
    return build_partial_tree(Dataset.unit([0.2, 0.5, 0.9]), max_depth=1)


class TestNodeMarginal:
    def test_one_sixth(self):
        ev = node_marginal(_three(), BetaNodePrior(1.0, 1.0))
        np.testing.assert_allclose(math.exp(ev.log_M), 1 / 6, rtol=1e-14)

    def test_two_thirds(self):
        ev = node_marginal(_three(), BetaNodePrior(1.0, 1.0), masses=(0.5, 0.5))
        np.testing.assert_allclose(math.exp(ev.log_eta), 2 / 3, rtol=1e-14)

    def test_small_nodes_contribute_nothing(self):
        root = build_partial_tree(Dataset.unit([0.3]), 2)
        ev = node_marginal(root, BetaNodePrior(1.0, 1.0))
        assert (ev.log_M, ev.log_eta) == (0.0, 0.0)

    def test_no_child_data_is_one(self):
        root = build_partial_tree(Dataset.unit([0.5, 0.5]), 1)
        assert root.child_counts() == (0, 0)
        assert node_marginal(root, BetaNodePrior(1.0, 1.0)).log_M == 0.0

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
    def test_invalid_prior(self, bad):
        with pytest.raises(InvalidPrior):
            BetaNodePrior(bad, 1.0)


class TestBayesFactor:
    def test_empty(self, prior1):
        assert bayes_factor(build_partial_tree(Dataset.unit(np.empty(0)), 5), prior1) == 0.0

    def test_single_split_closed_form(self, rng, prior1):
        for _ in range(20):
            x = rng.random(rng.integers(2, 40))
            root = build_fixed_tree(Dataset.unit(x), 1)
            nl, nr = root.child_counts()
            want = beta_binomial_log_ratio(1.0, 1.0, nl, nr, 0.5)
            np.testing.assert_allclose(bayes_factor(root, prior1), want, rtol=1e-13, atol=1e-13)

    def test_uniform_data_scores_below_peaked_data(self, prior1):
        below = 0
        for seed in range(20):
            u = np.random.default_rng(seed).random(2000)
            b = scenario("beta500_20").sample(2000, seed)
            fu = bayes_factor(build_partial_tree(Dataset.unit(u), 10), prior1)
            fb = bayes_factor(build_partial_tree(Dataset.unit(b), 10), prior1)
            below += fu < fb
        assert below == 20


class TestBranchMean:
    def test_half(self):
        assert posterior_branch_mean(_three(), "left", BetaNodePrior(1, 1)) == 0.5

    def test_three_quarters(self):
        x = [0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.8]
        root = build_partial_tree(Dataset.unit(x), 1, p=6 / 7)
        assert root.child_counts() == (5, 1)
        assert posterior_branch_mean(root, "left", BetaNodePrior(1, 1)) == 0.75

    def test_leaf_rejected(self):
        with pytest.raises(ValueError):
            posterior_branch_mean(build_partial_tree(Dataset.unit([0.4]), 1), "left",
                                  BetaNodePrior(1, 1))


class TestPredictive:
    def test_no_data_is_base(self):
        H = BaseMeasure((Marginal("beta", (2.0, 3.0)),))
        root = build_partial_tree(Dataset.unit(np.empty(0)), 5)
        q = np.linspace(0.05, 0.95, 10)
        np.testing.assert_array_equal(predictive_density(root, PriorSpec(H), q), H.density(q[:, None]))

    def test_integrates_to_one(self, prior1, rng):
        root = build_partial_tree(Dataset.unit(rng.beta(2, 5, 300)), 8)
        cuts = sorted(n.split.location for n in root.iter_preorder() if n.split)
        edges = np.array([0.0, *cuts, 1.0])
        mids = 0.5 * (edges[1:] + edges[:-1])
        total = np.sum(predictive_density(root, prior1, mids) * np.diff(edges))
        np.testing.assert_allclose(total, 1.0, rtol=1e-12)

    def test_posterior_draws_average_to_mean(self, prior1, rng):
        root = build_partial_tree(Dataset.unit(rng.random(40)), 4)
        q = np.linspace(0.01, 0.99, 25)
        draws = np.array([sample_posterior_density(root, prior1, 3, q, draw=t)
                          for t in range(10000)])
        se = draws.std(axis=0, ddof=1) / 100
        assert np.all(np.abs(draws.mean(axis=0) - predictive_density(root, prior1, q)) < 3.5 * se)

    def test_concentrated_prior_draws_collapse(self, unit1, rng):
        root = build_partial_tree(Dataset.unit(rng.random(30)), 3)
        prior = PriorSpec(unit1, 1e6)
        q = np.linspace(0.01, 0.99, 30)
        draws = np.array([sample_posterior_density(root, prior, 0, q, draw=t) for t in range(200)])
        assert np.all(draws.std(axis=0) < 1e-2)


class TestBetaGrid:
    def test_exact_on_grid(self):
        g = precompute_beta_grid(PriorSpec(BaseMeasure.uniform([0], [1]), 2.0))
        for a, b in [(0, 0), (3, 7), (250, 251)]:
            for q in (0.01, 0.37, 0.5, 0.99):
                np.testing.assert_allclose(g.log_beta(q, a, b), betaln(2 * q + a, 2 * (1 - q) + b),
                                           rtol=1e-12, atol=1e-12)

    def test_interpolation_error(self):
        g = precompute_beta_grid(PriorSpec(BaseMeasure.uniform([0], [1]), 2.0))
        for a, b in [(1, 1), (3, 2), (10, 10), (100, 80), (2500, 2500)]:
            assert abs(g.log_beta(0.505, a, b) - betaln(1.01 + a, 0.99 + b)) < 1e-4

    def test_cache_matches_direct_on_mixture(self, prior1):
        g = precompute_beta_grid(prior1)
        root = build_fixed_tree(Dataset.unit(scenario("mix1d").sample(5000, 0)), 12)
        assert abs(bayes_factor(root, prior1, g) - bayes_factor(root, prior1)) < 1e-6

    def test_needs_constant_concentration(self, unit1):
        with pytest.raises(InvalidPrior):
            precompute_beta_grid(PriorSpec(unit1, [2.0, 3.0]))


def test_factorization_identity(rng):
    """Plugged-in branch probabilities reproduce the direct binomial product."""
    for _ in range(10):
        x = rng.random(rng.integers(2, 21))
        root = build_partial_tree(Dataset.unit(x), 5)
        log_sum = 0.0
        direct = 1.0
        for node in root.iter_preorder():
            if node.split is None:
                continue
            nl, nr = node.child_counts()
            f = rng.uniform(0.05, 0.95)
            log_sum += nl * math.log(f) + nr * math.log(1 - f)
            direct *= f ** nl * (1 - f) ** nr
        np.testing.assert_allclose(math.exp(log_sum), direct, rtol=1e-10)
