"""Conjugate Polya tree inference on a given partition tree.

All evidences are kept in log space.  Under the partial likelihood the
child counts of a node already exclude its anchor (and any ties), so the
same beta-binomial formulas serve both likelihoods; the two modes differ
only in which tree they are applied to and in the admissible leaf sizes.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import betaln

from .errors import InvalidPrior, OutOfDomain
from .partition import PartitionNode, SplitMode, node_base_mass
from .rng import stream


class Likelihood(str, Enum):
    PARTIAL = "partial"
    FULL = "full"

    @classmethod
    def of(cls, node: PartitionNode):
        if node.split is None or node.split.mode is SplitMode.MEDIAN_ON_DATA:
            return cls.PARTIAL
        return cls.FULL


@dataclass(frozen=True)
class BetaNodePrior:
    alpha_left: float
    alpha_right: float

    def __post_init__(self):
        for a in (self.alpha_left, self.alpha_right):
            if not (np.isfinite(a) and a > 0):
                raise InvalidPrior(f"beta pseudo-counts must be positive and finite, got {a}")

    @property
    def total(self):
        return self.alpha_left + self.alpha_right


@dataclass(frozen=True)
class NodeEvidence:
    log_M: float
    log_eta: float


@dataclass(frozen=True)
class PriorSpec:
    """Base measure plus concentration schedule: ``alpha = c(depth) * H(child | A)``.

    ``concentration`` is a constant or a per-level sequence whose last entry
    repeats for deeper levels.
    """

    base: object
    concentration: Union[float, Sequence[float]] = 2.0

    def __post_init__(self):
        cs = np.atleast_1d(np.asarray(self.concentration, dtype=float))
        if cs.size == 0 or np.any(~np.isfinite(cs)) or np.any(cs <= 0):
            raise InvalidPrior("concentration must be positive and finite")

    def c_at(self, depth):
        c = self.concentration
        if np.isscalar(c):
            return float(c)
        return float(c[min(depth, len(c) - 1)])

    def node_prior(self, node: PartitionNode, j=None):
        hl, hr = node_base_mass(node, self.base, j)
        c = self.c_at(node.depth)
        return BetaNodePrior(c * hl, c * hr), (hl, hr)


class BetaGrid:
    """Tabulated ``log B(c q + a, c (1 - q) + b)`` on ``q = step, 2 step, ..., 1 - step``.

    Rows are filled lazily, one per count pair ``(a, b)``.  Lookups between
    grid points interpolate linearly; lookups on a grid point return the
    tabulated (exact) value.
    """

    def __init__(self, concentration: float, grid_step: float = 0.01):
        self.c = float(concentration)
        self.step = float(grid_step)
        m = int(round(1.0 / self.step))
        self.q = np.arange(1, m) * self.step
        self._rows = {}

    def row(self, a, b):
        key = (a, b)
        r = self._rows.get(key)
        if r is None:
            r = betaln(self.c * self.q + a, self.c * (1.0 - self.q) + b)
            self._rows[key] = r
        return r

    def log_beta(self, q, a, b):
        pos = q / self.step - 1.0
        i = int(np.floor(pos))
        if i < 0 or i >= self.q.size - 1:
            return float(betaln(self.c * q + a, self.c * (1.0 - q) + b))
        r = self.row(a, b)
        t = pos - i
        if t == 0.0:
            return float(r[i])
        return float((1.0 - t) * r[i] + t * r[i + 1])


def precompute_beta_grid(prior: PriorSpec, grid_step: float = 0.01) -> BetaGrid:
    """Cache for posterior beta functions under a constant concentration."""
    if not np.isscalar(prior.concentration):
        raise InvalidPrior("the beta grid needs a constant concentration")
    return BetaGrid(prior.concentration, grid_step)


def node_marginal(node: PartitionNode, prior: BetaNodePrior,
                  mode: Optional[Likelihood] = None, masses=None, j=None,
                  cache: Optional[BetaGrid] = None) -> NodeEvidence:
    """Marginal (partial) likelihood of the binomial split at ``node``.

    ``masses`` are the conditional base masses used for the likelihood
    ratio; they default to the prior mean ``alpha / sum(alpha)``.
    """
    if mode is None:
        mode = Likelihood.of(node)
    if node.split is None or node.n_total <= 1:
        return NodeEvidence(0.0, 0.0)
    nl, nr = node.child_counts(j)
    al, ar = prior.alpha_left, prior.alpha_right
    if masses is None:
        masses = (al / prior.total, ar / prior.total)
    hl, hr = masses
    if cache is not None and np.isclose(prior.total, cache.c, rtol=0, atol=1e-12):
        post = cache.log_beta(hl, nl, nr)
    else:
        post = betaln(al + nl, ar + nr)
    log_M = float(post - betaln(al, ar))
    log_eta = log_M - _xlogy(nl, hl) - _xlogy(nr, hr)
    return NodeEvidence(log_M, float(log_eta))


def _xlogy(n, h):
    return 0.0 if n == 0 else n * np.log(h)


def bayes_factor(root: PartitionNode, prior: PriorSpec,
                 cache: Optional[BetaGrid] = None) -> float:
    """log phi(Omega): the sum of log eta over the internal nodes."""
    total = 0.0
    for node in root.iter_preorder():
        if node.split is None or node.n_total <= 1:
            continue
        beta, masses = prior.node_prior(node)
        total += node_marginal(node, beta, masses=masses, cache=cache).log_eta
    return total


def posterior_branch_mean(node: PartitionNode, side: str, prior: BetaNodePrior,
                          mode: Optional[Likelihood] = None) -> float:
    """Posterior mean of F(child | A) for ``side`` in {"left", "right"}.

    The denominator uses the counts that actually enter the binomial term,
    i.e. after the anchor and ties are taken out.
    """
    if node.split is None:
        raise ValueError("leaf nodes have no branch probabilities")
    nl, nr = node.child_counts()
    num = prior.alpha_left + nl if side == "left" else prior.alpha_right + nr
    return num / (prior.total + nl + nr)


def _as_queries(query, d):
    q = np.asarray(query, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    elif q.ndim == 1:
        q = q.reshape(-1, 1) if d == 1 else q.reshape(1, -1)
    return q


def _check_inside(root, q):
    lo = np.asarray(root.region.lower)
    hi = np.asarray(root.region.upper)
    if np.any(q < lo) or np.any(q > hi):
        raise OutOfDomain("query outside the sample space")


def _branch_ratio(root, q, log_ratio):
    """Accumulate ``log_ratio(node)`` -> (log left, log right) down each query's branch."""
    out = np.zeros(q.shape[0])

    def walk(node, idx, acc):
        if node.children is None or idx.size == 0:
            out[idx] = acc
            return
        j = node.split.dimension
        go_left = q[idx, j] <= node.split.location
        ll, lr = log_ratio(node)
        walk(node.children[0], idx[go_left], acc + ll)
        walk(node.children[1], idx[~go_left], acc + lr)

    walk(root, np.arange(q.shape[0]), 0.0)
    return out


def predictive_density(root: PartitionNode, prior: PriorSpec, query) -> np.ndarray:
    """Posterior mean density E(f(x') | x) = h(x') * prod varphi along the branch."""
    q = _as_queries(query, root.region.dim)
    _check_inside(root, q)

    def log_varphi(node):
        beta, (hl, hr) = prior.node_prior(node)
        ml = posterior_branch_mean(node, "left", beta)
        return np.log(ml) - np.log(hl), np.log1p(-ml) - np.log(hr)

    return prior.base.density(q) * np.exp(_branch_ratio(root, q, log_varphi))


def sample_posterior_density(root: PartitionNode, prior: PriorSpec, rng_seed,
                             query_grid, draw: int = 0) -> np.ndarray:
    """One posterior density realisation on ``query_grid``.

    Branch probabilities are drawn from their conjugate beta posteriors in
    preorder from the sub-stream ``(rng_seed, draw)``.
    """
    q = _as_queries(query_grid, root.region.dim)
    _check_inside(root, q)
    internal = [node for node in root.iter_preorder() if node.split is not None]
    a = np.empty(len(internal))
    b = np.empty(len(internal))
    masses = {}
    for i, node in enumerate(internal):
        beta, hm = prior.node_prior(node)
        nl, nr = node.child_counts()
        a[i], b[i] = beta.alpha_left + nl, beta.alpha_right + nr
        masses[node.index] = (i, hm)
    theta = stream(rng_seed, draw).beta(a, b) if internal else np.empty(0)

    def log_ratio(node):
        i, (hl, hr) = masses[node.index]
        return np.log(theta[i]) - np.log(hl), np.log1p(-theta[i]) - np.log(hr)

    return prior.base.density(q) * np.exp(_branch_ratio(root, q, log_ratio))
