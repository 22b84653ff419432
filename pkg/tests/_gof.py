"""Binned chi-square goodness of fit between a sampler and its pdf."""

import numpy as np
from scipy.stats import chi2

from ptree.quadrature import bin_probabilities


def binned_gof(density, n=100_000, bins=32, seed=0, min_expected=5.0):
    """p-value of Pearson's statistic on equal bins, sparse bins pooled into one."""
    d = density.dimension
    lower, upper = (0.0,) * d, (1.0,) * d
    probs = bin_probabilities(density.pdf, bins, lower=lower, upper=upper).ravel()
    x = density.sample(n, seed).reshape(n, d)
    idx = np.clip((x * bins).astype(np.int64), 0, bins - 1)
    flat = np.ravel_multi_index(tuple(idx.T), (bins,) * d)
    counts = np.bincount(flat, minlength=bins ** d).astype(float)
    expected = n * probs
    big = expected >= min_expected
    obs = np.append(counts[big], counts[~big].sum())
    exp = np.append(expected[big], expected[~big].sum())
    if exp[-1] < min_expected:
        obs, exp = obs[:-1], exp[:-1]
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return float(chi2.sf(stat, obs.size - 1)), stat, obs.size - 1
