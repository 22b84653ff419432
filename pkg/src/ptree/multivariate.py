"""Multivariate optional Polya tree with a latent splitting axis J(A).

Every node that some sequence of axis choices can reach is materialised
up front (:func:`expand_and_pass`).  Under the partial likelihood the cut
on axis j is the node's median along j, all ``d`` axis medians are taken
out before counting children, and the expansion is a tree keyed by the
path of (axis, side) choices.  Under the full likelihood the cuts are
midpoints, which commute across axes, so nodes are shared by region and
the expansion collapses to a DAG.

The posterior over (J, S) is a top-down Markov chain; :func:`sample_tree`
draws from it and :func:`posterior_mean_mc` averages the tree-conditional
posterior means.
"""

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import betaln, logsumexp

from ._backend import kernels
from .errors import DepthNegative, InvalidPrior, NumericalUnderflow, OutOfDomain
from .markov import StateModel
from .partition import Dataset
from .polya import Likelihood, _as_queries
from .rng import stream

DEFAULT_NODE_BUDGET = 4_000_000


def node_budget():
    return int(os.environ.get("PTREE_NODE_BUDGET", DEFAULT_NODE_BUDGET))


@dataclass(frozen=True)
class SplitPrior:
    lam: tuple

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
            raise InvalidPrior("split weights must be a probability vector")

    @classmethod
    def uniform(cls, d):
        return cls(tuple([1.0 / d] * d))

    @property
    def log_lam(self):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.lam, dtype=float))


@dataclass
class Expansion:
    """Flat arrays describing every reachable node, in first-visit preorder."""

    depth: np.ndarray
    n: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cut: np.ndarray
    cnt: np.ndarray
    child: np.ndarray
    mode: Likelihood
    max_depth: int
    p: float = 0.5
    leaf_size: int = 1
    prune_count: int = 0
    memo_hits: int = 0

    @property
    def n_nodes(self):
        return self.depth.size

    @property
    def dim(self):
        return self.lower.shape[1]

    @property
    def internal(self):
        return self.child[:, 0, 0] >= 0


def expand(data: Dataset, max_depth: int, mode=Likelihood.PARTIAL, p: float = 0.5,
           leaf_size: Optional[int] = None, memoize: bool = True,
           budget: Optional[int] = None) -> Expansion:
    if max_depth < 0:
        raise DepthNegative(f"max_depth must be >= 0, got {max_depth}")
    mode = Likelihood(mode)
    partial = mode is Likelihood.PARTIAL
    if leaf_size is None:
        leaf_size = data.dim if partial else 1
    if budget is None:
        budget = node_budget()
    out = kernels.expand(data.points, data.bounds.lower, data.bounds.upper,
                         int(max_depth), int(leaf_size), float(p), partial,
                         bool(memoize), int(budget))
    return Expansion(out["depth"], out["n"], out["lower"], out["upper"], out["cut"],
                     out["cnt"], out["child"], mode, int(max_depth), float(p),
                     int(leaf_size), int(out["prune_count"]), int(out["memo_hits"]))


def expansion_from_tree(root, max_depth: Optional[int] = None) -> Expansion:
    """Single-axis expansion of a one-dimensional partition tree."""
    nodes = list(root.iter_preorder())
    if root.region.dim != 1:
        raise ValueError("only one-dimensional trees map onto a single-axis expansion")
    N = len(nodes)
    child = np.full((N, 1, 2), -1, dtype=np.int64)
    cnt = np.zeros((N, 1, 2), dtype=np.int64)
    cut = np.zeros((N, 1))
    for node in nodes:
        if node.children is not None:
            child[node.index, 0] = (node.children[0].index, node.children[1].index)
            cnt[node.index, 0] = node.child_counts(0)
            cut[node.index, 0] = node.split.location
    depth = np.array([node.depth for node in nodes], dtype=np.int64)
    if max_depth is None:
        max_depth = int(depth.max())
    mode = Likelihood.of(root)
    return Expansion(depth, np.array([node.n_total for node in nodes], dtype=np.int64),
                     np.array([node.region.lower for node in nodes], dtype=float),
                     np.array([node.region.upper for node in nodes], dtype=float),
                     cut, cnt, child, mode, int(max_depth),
                     leaf_size=1)


@dataclass
class JointPosterior:
    """Message tables and joint (J, S) posterior transitions over an expansion.

    ``log_P[i, s, j, s']`` is log P(J(A_i) = j, S(A_i) = s' | S(parent) = s, x);
    ``log_varphi[i, j, s, side]`` is the log posterior-mean branch ratio.
    """

    ex: Expansion
    model: StateModel
    split_prior: SplitPrior
    max_depth: int
    hl: np.ndarray
    log_eta: np.ndarray
    log_phi: np.ndarray
    log_P: np.ndarray
    log_varphi: np.ndarray
    split: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self):
        return self.ex.dim

    @property
    def n_states(self):
        return self.model.n_states

    def root_log_phi(self, state=None):
        return float(self.log_phi[0, self.model.root_state if state is None else state])

    def truncate(self, max_depth):
        """Posterior for the same data with every node at ``max_depth`` made a leaf."""
        if max_depth > self.ex.max_depth:
            raise ValueError("cannot deepen an expansion by truncation")
        return message_pass_joint(self.ex, self.model, self.split_prior, max_depth)

    def stats(self):
        return {"node_count": int(self.ex.n_nodes), "prune_count": int(self.ex.prune_count),
                "memo_hits": int(self.ex.memo_hits)}


def _base_masses(ex: Expansion, base):
    hl = np.full((ex.n_nodes, ex.dim), 0.5)
    internal = ex.internal
    for j in range(ex.dim):
        hl[internal, j] = base.conditional_mass(
            j, ex.lower[internal, j], ex.upper[internal, j], ex.cut[internal, j])
    return hl


def message_pass_joint(ex: Expansion, model: StateModel, split_prior: SplitPrior,
                       max_depth: Optional[int] = None) -> JointPosterior:
    if max_depth is None:
        max_depth = ex.max_depth
    d, S, N = ex.dim, model.n_states, ex.n_nodes
    if len(split_prior.lam) != d:
        raise InvalidPrior("split weights do not match the data dimension")
    stop = np.asarray(model.stopping)
    act = np.flatnonzero(~stop)
    split = ex.internal & (ex.depth < max_depth)
    idx = np.flatnonzero(split)

    hl = _base_masses(ex, model.base)
    hr = 1.0 - hl
    c = np.full((N, S), np.nan)
    depths = np.arange(int(ex.depth.max()) + 1)
    for s in act:
        c[:, s] = np.array([model.c_at(s, int(t)) for t in depths])[ex.depth]
    al = c[:, None, :] * hl[:, :, None]
    ar = c[:, None, :] * hr[:, :, None]
    nl = ex.cnt[:, :, 0, None].astype(float)
    nr = ex.cnt[:, :, 1, None].astype(float)

    log_eta = np.zeros((N, d, S))
    if idx.size and act.size:
        a, b = al[idx][:, :, act], ar[idx][:, :, act]
        if np.any(a <= 0) or np.any(b <= 0):
            raise InvalidPrior("zero base mass produced a non-positive beta pseudo-count")
        with np.errstate(divide="ignore", invalid="ignore"):
            lh = (np.where(nl[idx] == 0, 0.0, nl[idx] * np.log(hl[idx][:, :, None]))
                  + np.where(nr[idx] == 0, 0.0, nr[idx] * np.log(hr[idx][:, :, None])))
        log_eta[np.ix_(idx, np.arange(d), act)] = (
            betaln(a + nl[idx], b + nr[idx]) - betaln(a, b) - lh)

    log_lam = split_prior.log_lam
    log_phi = np.zeros((N, S))
    terms = np.zeros((N, d, S))
    levels = ex.depth[idx]
    for t in range(max_depth - 1, -1, -1):
        lvl = idx[levels == t]
        if lvl.size == 0:
            continue
        ch = ex.child[lvl]
        tm = (log_lam[None, :, None] + log_eta[lvl]
              + log_phi[ch[:, :, 0]] + log_phi[ch[:, :, 1]])
        terms[lvl] = tm
        with np.errstate(divide="ignore"):
            lr = np.log(model.rho_at(t))
        # (nodes, s, j, s')
        log_phi[lvl] = logsumexp(lr[None, :, None, :] + tm[:, None, :, :], axis=(2, 3))
    if not np.all(np.isfinite(log_phi)):
        raise NumericalUnderflow("a marginal likelihood ratio collapsed to zero")

    with np.errstate(divide="ignore"):
        lr_all = np.log(model.transition)
    lr_node = lr_all[np.minimum(ex.depth, lr_all.shape[0] - 1)]
    log_P = (lr_node[:, :, None, :] + terms[:, None, :, :] - log_phi[:, :, None, None])
    leaf = ~split
    if np.any(leaf):
        log_P[leaf] = lr_node[leaf][:, :, None, :] + log_lam[None, None, :, None]

    log_vp = np.zeros((N, d, S, 2))
    tot = al + ar + nl + nr
    with np.errstate(divide="ignore", invalid="ignore"):
        log_vp[..., 0] = np.log((al + nl) / tot) - np.log(hl)[:, :, None]
        log_vp[..., 1] = np.log((ar + nr) / tot) - np.log(hr)[:, :, None]
    log_vp[:, :, stop, :] = 0.0
    log_vp[~split] = 0.0
    return JointPosterior(ex, model, split_prior, int(max_depth), hl, log_eta, log_phi,
                          log_P, log_vp, split)


def expand_and_pass(data: Dataset, model: StateModel, split_prior: Optional[SplitPrior] = None,
                    max_depth: int = 6, mode=Likelihood.PARTIAL, p: float = 0.5,
                    leaf_size: Optional[int] = None, memoize: bool = True,
                    budget: Optional[int] = None) -> JointPosterior:
    """Expand every reachable node and run the joint (J, S) message pass.

    Parameters
    ----------
    data : Dataset
    model : StateModel
        Latent state prior; use :meth:`StateModel.opt` for the optional
        Polya tree.
    split_prior : SplitPrior, optional
        Prior over the split axis, uniform by default.
    max_depth : int
    mode : Likelihood
        ``partial`` for median cuts with anchor removal, ``full`` for
        midpoint cuts.
    leaf_size : int, optional
        Nodes with at most this many points are leaves; defaults to ``d``
        under the partial likelihood and 1 under the full likelihood.
    memoize : bool
        Share full-likelihood nodes by region.  Partial-likelihood nodes
        are keyed by their path and never shared.
    budget : int, optional
        Maximum node count (``PTREE_NODE_BUDGET`` overrides the default).
    """
    if split_prior is None:
        split_prior = SplitPrior.uniform(data.dim)
    ex = expand(data, max_depth, mode, p, leaf_size, memoize, budget)
    return message_pass_joint(ex, model, split_prior, max_depth)


@dataclass
class SampledTree:
    nodes: np.ndarray
    dims: np.ndarray
    states: np.ndarray
    terminal: np.ndarray

    @property
    def size(self):
        return self.nodes.size


def _cum_rows(post: JointPosterior):
    cum = getattr(post, "_cum", None)
    if cum is None:
        N, S, d = post.ex.n_nodes, post.n_states, post.dim
        cum = np.ascontiguousarray(np.cumsum(np.exp(post.log_P).reshape(N, S, d * S), axis=2))
        post._cum = cum
        post._split_u8 = np.ascontiguousarray(post.split, dtype=np.uint8)
        post._stop_u8 = np.ascontiguousarray(post.model.stopping, dtype=np.uint8)
        post._child = np.ascontiguousarray(post.ex.child, dtype=np.int64)
        post._cut = np.ascontiguousarray(post.ex.cut, dtype=np.float64)
    return cum


def _uniform_budget(post):
    return int(min(2 ** (post.max_depth + 1), post.ex.n_nodes + 1))


def _draw(post: JointPosterior, rng):
    cum = _cum_rows(post)
    u = rng.random(_uniform_budget(post))
    nodes, js, ss, _ = kernels.sample_tree(cum, post._child, post._split_u8, post._stop_u8,
                                           u, post.model.root_state)
    return nodes, js, ss


def sample_tree(post: JointPosterior, rng_seed, index: int = 0) -> SampledTree:
    """Draw one tree (axis and state per node) from the joint posterior."""
    nodes, js, ss = _draw(post, stream(rng_seed, index))
    return SampledTree(nodes, js, ss, leaf_cells(post, nodes, js))


@dataclass
class MCResult:
    mean: np.ndarray
    se: np.ndarray
    quantiles: Optional[np.ndarray] = None
    probs: tuple = ()
    n_trees: int = 0
    integrals: Optional[np.ndarray] = None


def _check_queries(post, query):
    q = np.ascontiguousarray(_as_queries(query, post.dim), dtype=np.float64)
    if np.any(q < post.model.base.lower) or np.any(q > post.model.base.upper):
        raise OutOfDomain("query outside the sample space")
    return q


def posterior_mean_mc(post: JointPosterior, n_trees: int, query_grid, seed=0,
                      sample_betas: bool = False, quantiles=(),
                      cell_integrals: bool = False) -> MCResult:
    """Average of tree-conditional posterior means over ``n_trees`` sampled trees.

    With ``sample_betas`` each tree also draws its branch probabilities from
    the conjugate posterior, so every term is a posterior density draw and
    pointwise ``quantiles`` give credible bands.  With ``cell_integrals``
    each term is also integrated by the midpoint rule on its own tree's
    leaf cells (exact for a uniform base measure).
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    q = _check_queries(post, query_grid)
    h = post.model.base.density(q)
    _cum_rows(post)
    keep = bool(quantiles)
    draws = np.empty((n_trees, q.shape[0])) if keep else None
    integrals = np.empty(n_trees) if cell_integrals else None
    total = np.zeros(q.shape[0])
    total_sq = np.zeros(q.shape[0])
    for t in range(n_trees):
        rng = stream(seed, t)
        nodes, js, ss = _draw(post, rng)
        if sample_betas and nodes.size:
            a, b = _posterior_beta(post, nodes, js, ss)
            theta = rng.beta(a, b)
            hl = post.hl[nodes, js]
            log_ratio = np.stack([np.log(theta) - np.log(hl),
                                  np.log1p(-theta) - np.log1p(-hl)], axis=1)
        else:
            log_ratio = post.log_varphi[nodes, js, ss]
        log_ratio = np.ascontiguousarray(log_ratio, dtype=np.float64)
        f = h * np.exp(kernels.eval_tree(q, nodes, js, log_ratio, post._cut, post._child,
                                         post.ex.n_nodes))
        if cell_integrals:
            integrals[t] = _leaf_integral(post, nodes, js, log_ratio)
        total += f
        total_sq += f * f
        if keep:
            draws[t] = f
    mean = total / n_trees
    var = np.maximum(total_sq / n_trees - mean * mean, 0.0)
    se = np.sqrt(var / max(n_trees - 1, 1))
    qs = None
    if keep:
        qs = np.quantile(draws, np.asarray(quantiles), axis=0)
    return MCResult(mean, se, qs, tuple(quantiles), n_trees, integrals)


def leaf_cells(post: JointPosterior, nodes, js):
    """Expansion indices of the leaf cells of a sampled tree."""
    if nodes.size == 0:
        return np.zeros(1, dtype=np.int64)
    kids = post.ex.child[nodes, js].reshape(-1)
    return np.setdiff1d(kids, nodes)


def _leaf_integral(post, nodes, js, log_ratio):
    cells = leaf_cells(post, nodes, js)
    lo, hi = post.ex.lower[cells], post.ex.upper[cells]
    mid = np.ascontiguousarray(0.5 * (lo + hi))
    f = post.model.base.density(mid) * np.exp(
        kernels.eval_tree(mid, nodes, js, log_ratio, post._cut, post._child, post.ex.n_nodes))
    return float(np.sum(f * np.prod(hi - lo, axis=1)))


def _posterior_beta(post, nodes, js, ss):
    model = post.model
    depth = post.ex.depth[nodes]
    c = np.array([model.c_at(int(s), int(t)) for s, t in zip(ss, depth)])
    hl = post.hl[nodes, js]
    cnt = post.ex.cnt[nodes, js]
    return c * hl + cnt[:, 0], c * (1.0 - hl) + cnt[:, 1]


def _exact_single_axis(post: JointPosterior, q):
    """Bottom-up xi recursion along each query's unique branch (d = 1)."""
    ex = post.ex
    D, Q, S = post.max_depth, q.shape[0], post.n_states
    path = np.full((Q, D + 1), -1, dtype=np.int64)
    side = np.zeros((Q, D), dtype=np.int64)
    path[:, 0] = 0
    cur = np.zeros(Q, dtype=np.int64)
    alive = np.ones(Q, dtype=bool)
    for t in range(D):
        alive &= post.split[cur]
        if not np.any(alive):
            break
        a = np.flatnonzero(alive)
        node = cur[a]
        right = (q[a, 0] > ex.cut[node, 0]).astype(np.int64)
        side[a, t] = right
        cur[a] = ex.child[node, 0, right]
        path[a, t + 1] = cur[a]
    P = np.exp(post.log_P[:, :, 0, :])
    vp = np.exp(post.log_varphi[:, 0])
    xi = np.ones((Q, S))
    for t in range(D - 1, -1, -1):
        a = np.flatnonzero(path[:, t + 1] >= 0)
        if a.size == 0:
            continue
        parent = path[a, t]
        below = vp[parent, :, side[a, t]] * xi[a]
        xi[a] = np.einsum("qst,qt->qs", P[parent], below)
    return xi[:, post.model.root_state]


def posterior_mean_exact(post: JointPosterior, query) -> np.ndarray:
    """Exact posterior mean by summing over every axis path through the expansion.

    With one axis this is a single pass down each query's branch.  Otherwise
    cost grows like ``2**depth`` nodes per query, which suits small problems
    and checks of the Monte Carlo estimate.
    """
    q = _check_queries(post, query)
    if post.dim == 1:
        return post.model.base.density(q) * _exact_single_axis(post, q)
    S, d = post.n_states, post.dim
    P = np.exp(post.log_P)
    vp = np.exp(post.log_varphi)
    ex = post.ex

    def xi(node, rows):
        out = np.ones((rows.size, S))
        if not post.split[node] or rows.size == 0:
            return out
        out[:] = 0.0
        for j in range(d):
            right = q[rows, j] > ex.cut[node, j]
            for side, sel in ((0, ~right), (1, right)):
                if not np.any(sel):
                    continue
                sub = rows[sel]
                below = vp[node, j, :, side][None, :] * xi(ex.child[node, j, side], sub)
                out[sel] += below @ P[node, :, j, :].T
        return out

    ratio = xi(0, np.arange(q.shape[0]))[:, post.model.root_state]
    return post.model.base.density(q) * ratio
