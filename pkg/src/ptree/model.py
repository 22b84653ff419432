"""Fit and predict entry points shared by the command line and the harness.

One-dimensional fits build a single partition tree; in higher dimensions
every axis sequence is expanded.  Both end up as a :class:`JointPosterior`
so persistence and prediction have one code path.
"""

from typing import Optional, Sequence

import numpy as np

from .base import BaseMeasure
from .markov import StateModel
from .multivariate import (JointPosterior, SplitPrior, expand_and_pass, expansion_from_tree,
                           message_pass_joint, posterior_mean_exact, posterior_mean_mc)
from .partition import Dataset, Region, build_fixed_tree, build_partial_tree
from .polya import Likelihood


def make_state_model(base: BaseMeasure, states: int = 2, stop_prob: float = 0.5,
                     concentration: float = 2.0) -> StateModel:
    """``states=1`` gives the plain Polya tree, ``states=2`` the optional Polya tree."""
    if states == 1:
        return StateModel.single(base, concentration)
    if states == 2:
        return StateModel.opt(base, stop_prob, concentration)
    raise ValueError("states must be 1 or 2")


def fit_model(points, lower: Optional[Sequence[float]] = None,
              upper: Optional[Sequence[float]] = None, mode="partial", max_depth: int = 10,
              states: int = 2, stop_prob: float = 0.5, concentration: float = 2.0,
              split_weights: Optional[Sequence[float]] = None,
              leaf_size: Optional[int] = None, p: float = 0.5,
              budget: Optional[int] = None) -> JointPosterior:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d = pts.shape[1]
    lower = np.zeros(d) if lower is None else np.asarray(lower, dtype=float)
    upper = np.ones(d) if upper is None else np.asarray(upper, dtype=float)
    data = Dataset(pts, Region(tuple(float(v) for v in lower), tuple(float(v) for v in upper)))
    base = BaseMeasure.uniform(lower, upper)
    model = make_state_model(base, states, stop_prob, concentration)
    mode = Likelihood(mode)
    split_prior = SplitPrior.uniform(d) if split_weights is None else SplitPrior(tuple(split_weights))
    if d == 1:
        if mode is Likelihood.PARTIAL:
            root = build_partial_tree(data, max_depth, p, leaf_size)
        else:
            root = build_fixed_tree(data, max_depth)
        ex = expansion_from_tree(root, max_depth)
        ex.mode = mode
        ex.p = p
        ex.leaf_size = 1 if leaf_size is None else int(leaf_size)
        return message_pass_joint(ex, model, split_prior, max_depth)
    return expand_and_pass(data, model, split_prior, max_depth, mode, p, leaf_size,
                           budget=budget)


def predict_mean(post: JointPosterior, query, mc_trees: int = 200, seed=0):
    """Posterior mean density: exact in one dimension, Monte Carlo otherwise."""
    if post.dim == 1:
        return posterior_mean_exact(post, query)
    return posterior_mean_mc(post, mc_trees, query, seed).mean


def predict_bands(post: JointPosterior, query, draws: int, quantiles, seed=0):
    """Pointwise posterior quantiles from ``draws`` posterior density draws."""
    res = posterior_mean_mc(post, draws, query, seed, sample_betas=True,
                            quantiles=tuple(quantiles))
    return res.quantiles
