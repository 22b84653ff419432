import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ptree.base import BaseMeasure, Marginal
from ptree.errors import DepthNegative, EmptyDomain, OutOfDomain, ZeroMass
from ptree.partition import (Dataset, Region, SplitMode, build_fixed_tree, build_partial_tree,
                             node_base_mass, order_index)


def _all_nodes(root):
    return list(root.iter_preorder())


class TestPartialTree:
    def test_three_points(self):
        root = build_partial_tree(Dataset.unit([0.2, 0.5, 0.9]), max_depth=3)
        assert root.split.location == 0.5
        assert root.split.order_index == 2
        assert root.split.mode is SplitMode.MEDIAN_ON_DATA
        assert root.child_counts() == (1, 1)
        assert root.tie_count == 1
        assert all(c.is_leaf and c.n_total == 1 for c in root.children)

    def test_empty(self):
        root = build_partial_tree(Dataset.unit(np.empty(0)), max_depth=4)
        assert root.is_leaf and root.n_total == 0

    def test_count_halving(self, rng):
        for d in (1, 2):
            x = rng.random((1000, d))
            root = build_partial_tree(Dataset.unit(x, d), max_depth=8)
            for node in _all_nodes(root):
                t = node.depth
                assert abs(node.n_total - 1000 * 2.0 ** -t) <= t * (d + 1)

    def test_recount_by_brute_force(self, rng):
        x = rng.random((200, 2))
        root = build_partial_tree(Dataset.unit(x, 2), max_depth=6)

        def check(node, pts):
            assert pts.shape[0] == node.n_total
            if node.split is None:
                return
            cuts = np.array(node.split.cuts)
            keep = ~np.any(pts == cuts, axis=1)
            assert node.tie_count == np.count_nonzero(~keep)
            for j in range(2):
                assert node.counts_left[j] == np.count_nonzero(keep & (pts[:, j] < cuts[j]))
                assert node.counts_right[j] == np.count_nonzero(keep & (pts[:, j] > cuts[j]))
            j = node.split.dimension
            check(node.children[0], pts[keep & (pts[:, j] < cuts[j])])
            check(node.children[1], pts[keep & (pts[:, j] > cuts[j])])

        check(root, x)

    def test_anchor_on_domain_boundary_is_leaf(self):
        root = build_partial_tree(Dataset.unit([0.0, 0.0, 0.4]), max_depth=3)
        assert root.is_leaf and root.n_total == 3

    def test_anchor_is_order_statistic(self, rng):
        x = rng.random((57, 2))
        root = build_partial_tree(Dataset.unit(x, 2), max_depth=1)
        k = math.ceil(57 * 0.5)
        for j in range(2):
            assert root.split.cuts[j] == np.sort(x[:, j])[k - 1]
            assert root.split.anchor_points[j][j] == root.split.cuts[j]
        assert all(isinstance(v, float) for a in root.split.anchor_points for v in a)

    def test_ties_removed(self):
        root = build_partial_tree(Dataset.unit([0.1, 0.5, 0.5, 0.5, 0.9]), max_depth=2)
        assert root.split.location == 0.5
        assert root.tie_count == 3
        assert root.child_counts() == (1, 1)

    def test_leaf_size_default_is_dimension(self, rng):
        root = build_partial_tree(Dataset.unit(rng.random((2, 2)), 2), max_depth=5)
        assert root.is_leaf

    def test_negative_depth(self):
        with pytest.raises(DepthNegative):
            build_partial_tree(Dataset.unit([0.5]), max_depth=-1)

    def test_determinism(self, rng):
        x = rng.random((300, 2))
        a = build_partial_tree(Dataset.unit(x, 2), 7)
        b = build_partial_tree(Dataset.unit(x.copy(), 2), 7)
        assert [n.split.cuts for n in _all_nodes(a) if n.split] == \
            [n.split.cuts for n in _all_nodes(b) if n.split]

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, st.integers(0, 60), elements=st.floats(0, 1)),
           st.integers(0, 6))
    def test_invariants(self, x, depth):
        root = build_partial_tree(Dataset.unit(x), depth)
        for node in _all_nodes(root):
            assert node.depth <= depth
            if node.split is None:
                lo, hi = node.region.lower[0], node.region.upper[0]
                xs = np.sort(x[(x >= lo) & (x <= hi)])
                on_edge = xs.size > 0 and xs[order_index(xs.size, 0.5) - 1] in (lo, hi)
                assert node.n_total <= 1 or node.depth == depth or on_edge
                continue
            nl, nr = node.child_counts()
            assert nl + nr + node.tie_count == node.n_total
            distinct = node.tie_count == 1
            if distinct:
                assert abs(nl - nr) <= 1
            left, right = node.children
            assert (left.n_total, right.n_total) == (nl, nr)
            assert left.depth == right.depth == node.depth + 1
            assert node.region.contains(left.region) and node.region.contains(right.region)
            assert left.region.upper[0] == right.region.lower[0] == node.split.location


class TestFixedTree:
    def test_three_points_boundary_left(self):
        root = build_fixed_tree(Dataset.unit([0.2, 0.5, 0.9]), max_depth=1)
        assert root.split.location == 0.5
        assert root.child_counts() == (2, 1)

    def test_empty_is_leaf(self):
        assert build_fixed_tree(Dataset.unit(np.empty(0)), 3).is_leaf

    def test_depth_zero(self, rng):
        root = build_fixed_tree(Dataset.unit(rng.random(40)), 0)
        assert root.is_leaf and root.n_total == 40

    def test_round_robin_midpoints(self, rng):
        root = build_fixed_tree(Dataset.unit(rng.random((500, 2)), 2), 4)
        for node in _all_nodes(root):
            if node.split:
                j = node.depth % 2
                assert node.split.dimension == j
                assert node.split.location == 0.5 * (node.region.lower[j] + node.region.upper[j])
                assert sum(node.child_counts()) == node.n_total


class TestBaseMass:
    def test_uniform_midpoint(self):
        root = build_fixed_tree(Dataset.unit([0.1, 0.7]), 1)
        assert node_base_mass(root, BaseMeasure.uniform([0], [1])) == (0.5, 0.5)

    def test_uniform_proportional(self):
        H = BaseMeasure.uniform([0], [1])
        hl = H.conditional_mass(0, 0.0, 1.0, 0.3)
        np.testing.assert_allclose([hl, 1 - hl], [0.3, 0.7], rtol=1e-15)

    def test_beta_marginal(self):
        H = BaseMeasure((Marginal("beta", (2.0, 1.0)),))
        root = build_fixed_tree(Dataset.unit([0.1, 0.7]), 1)
        np.testing.assert_allclose(node_base_mass(root, H), (0.25, 0.75), rtol=1e-14)

    def test_zero_mass(self):
        H = BaseMeasure((Marginal("uniform", (), 0.0, 0.5),))
        with pytest.raises(ZeroMass):
            H.conditional_mass(0, 0.6, 0.9, 0.7)

    def test_degenerate_bounds(self):
        with pytest.raises(EmptyDomain):
            Region((0.0,), (0.0,))

    def test_out_of_domain_data(self):
        with pytest.raises(OutOfDomain):
            Dataset.unit([0.5, 1.5])


def test_order_index_matches_floor_form():
    for n in range(1, 200):
        assert order_index(n, 0.5) == (n + 1) // 2
