import numpy as np
import pytest

from ptree.densities import scenario
from ptree.errors import InvalidPrior, OutOfDomain
from ptree.markov import (StateModel, message_pass, posterior_transitions,
                          predictive_density_latent, sample_posterior_density_latent,
                          state_marginals)
from ptree.partition import Dataset, build_fixed_tree, build_partial_tree
from ptree.polya import PriorSpec, bayes_factor, predictive_density

from _oracles import enumerate_configs, summarize


def _key_index(root, key):
    node = root
    for _, side in key:
        node = node.children[side]
    return node.index


def _fit(x, depth, model, builder=build_partial_tree):
    root = builder(Dataset.unit(x), depth)
    table = message_pass(root, model)
    return root, table, posterior_transitions(table, model)


class TestStateModel:
    def test_rows_must_sum_to_one(self, unit1):
        with pytest.raises(InvalidPrior):
            StateModel(unit1, [[0.5, 0.4], [0.0, 1.0]], (2.0, None), (False, True))

    def test_stopping_state_absorbing(self, unit1):
        with pytest.raises(InvalidPrior):
            StateModel(unit1, [[0.5, 0.5], [0.5, 0.5]], (2.0, None), (False, True))

    def test_active_state_needs_concentration(self, unit1):
        with pytest.raises(InvalidPrior):
            StateModel(unit1, [[1.0]], (0.0,), (False,))

    def test_dict_round_trip(self, opt1):
        again = StateModel.from_dict(opt1.to_dict())
        assert again.to_dict() == opt1.to_dict()


class TestMessagePass:
    def test_single_state_equals_bayes_factor(self, unit1, rng):
        x = rng.beta(2, 5, 400)
        for builder in (build_partial_tree, build_fixed_tree):
            root, table, _ = _fit(x, 9, StateModel.single(unit1), builder)
            np.testing.assert_allclose(table.log_bayes_factor,
                                       bayes_factor(root, PriorSpec(unit1, 2.0)), rtol=1e-13)

    def test_small_nodes_have_unit_phi(self, opt1, rng):
        root, table, _ = _fit(rng.random(60), 8, opt1)
        for node in root.iter_preorder():
            if node.n_total <= 1:
                np.testing.assert_array_equal(table.log_phi[node.index], 0.0)

    def test_enumeration(self, opt1):
        rho = opt1.rho_at(0)
        for seed in range(8):
            r = np.random.default_rng(seed)
            x = r.random(r.integers(2, 13))
            depth = int(r.integers(1, 4))
            root, table, trans = _fit(x, depth, opt1)
            configs = enumerate_configs(x[:, None], [0.0], [1.0], depth, True, 1, [1.0], rho,
                                        [2.0, None], [False, True])
            q = np.linspace(0.003, 0.997, 17)
            log_z, marg, pred = summarize(configs, q[:, None])
            np.testing.assert_allclose(table.root_log_phi(0), log_z, rtol=1e-10, atol=1e-12)
            got = state_marginals(table, trans, opt1)
            for key, dist in marg.items():
                i = _key_index(root, key)
                np.testing.assert_allclose(got[i, 0], dist.get((0, 0), 0.0), atol=1e-12)
            np.testing.assert_allclose(predictive_density_latent(root, opt1, table, q, trans),
                                       pred, rtol=1e-10)


class TestTransitions:
    def test_rows_sum_to_one(self, opt1, rng):
        _, _, trans = _fit(scenario("mix1d").sample(2000, 1), 10, opt1)
        P = trans.P
        assert np.all((P >= 0) & (P <= 1))
        np.testing.assert_allclose(P.sum(axis=-1), 1.0, atol=1e-10)

    def test_always_stop(self, unit1, rng):
        model = StateModel.opt(unit1, stop_prob=1.0)
        root, _, trans = _fit(rng.random(50), 5, model)
        assert trans.P[root.index, 0, 1] == 1.0


class TestPredictive:
    def test_all_stop_is_base(self, unit1, rng):
        model = StateModel.opt(unit1, stop_prob=1.0)
        root, table, trans = _fit(rng.beta(5, 2, 300), 8, model)
        q = np.linspace(0, 1, 101)
        np.testing.assert_array_equal(predictive_density_latent(root, model, table, q, trans),
                                      unit1.density(q[:, None]))

    def test_single_state_equals_plain_tree(self, unit1, rng):
        model = StateModel.single(unit1)
        root, table, trans = _fit(rng.beta(5, 2, 300), 8, model)
        q = np.linspace(0, 1, 101)
        np.testing.assert_allclose(predictive_density_latent(root, model, table, q, trans),
                                   predictive_density(root, PriorSpec(unit1, 2.0), q), rtol=1e-12)

    def test_mixture_integrates_to_one(self, opt1):
        root, table, trans = _fit(scenario("mix1d").sample(5000, 2), 8, opt1)
        cuts = sorted(n.split.location for n in root.iter_preorder() if n.split)
        edges = np.unique(np.concatenate([np.linspace(0, 1, 4097), cuts]))
        mids = 0.5 * (edges[1:] + edges[:-1])
        f = predictive_density_latent(root, opt1, table, mids, trans)
        assert abs(np.sum(f * np.diff(edges)) - 1.0) < 1e-3

    def test_out_of_domain(self, opt1, rng):
        root, table, trans = _fit(rng.random(10), 3, opt1)
        with pytest.raises(OutOfDomain):
            predictive_density_latent(root, opt1, table, [1.5], trans)

    def test_truncation_matches_shallow_build(self, opt1, rng):
        x = rng.random(500)
        deep = build_fixed_tree(Dataset.unit(x), 9)
        root, table, trans = _fit(x, 4, opt1, build_fixed_tree)
        cut_table = message_pass(deep, opt1, max_depth=4)
        assert cut_table.root_log_phi(0) == pytest.approx(table.root_log_phi(0), abs=1e-12)
        q = np.linspace(0, 1, 33)
        np.testing.assert_allclose(
            predictive_density_latent(deep, opt1, cut_table, q),
            predictive_density_latent(root, opt1, table, q, trans), rtol=1e-12)

    def test_draws_average_to_mean(self, opt1, rng):
        root, table, trans = _fit(rng.beta(2, 2, 80), 5, opt1)
        q = np.linspace(0.01, 0.99, 21)
        draws = np.array([sample_posterior_density_latent(table, trans, opt1, 11, q, draw=t)
                          for t in range(4000)])
        se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
        mean = predictive_density_latent(root, opt1, table, q, trans)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se + 1e-12)


def test_ratio_form_matches_raw_likelihood(opt1):
    """Transitions computed from raw marginal likelihoods equal the ratio-form ones."""
    x = np.array([0.05, 0.12, 0.3, 0.33, 0.41, 0.6, 0.62, 0.9])
    root, table, trans = _fit(x, 3, opt1)
    for node in root.iter_preorder():
        if node.split is None:
            continue
        i, (l, r) = node.index, node.children
        h = node.split.location - node.region.lower[0]
        w = node.region.upper[0] - node.region.lower[0]
        nl, nr = node.child_counts()
        # converting log phi to raw scale multiplies every term by the same H-likelihood
        log_h = nl * np.log(h / w) + nr * np.log(1 - h / w)
        raw = np.array([table.log_eta[i, s] + log_h + table.log_phi[l.index, s]
                        + table.log_phi[r.index, s] for s in range(2)])
        raw[1] = log_h
        raw += np.log(opt1.rho_at(node.depth)[0])
        p = np.exp(raw - np.logaddexp.reduce(raw))
        np.testing.assert_allclose(trans.P[i, 0], p, rtol=1e-10)
