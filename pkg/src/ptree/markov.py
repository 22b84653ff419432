"""Latent Markov states on a partition tree (optional Polya tree and friends).

Each internal node carries a hidden state drawn from a root-to-leaf Markov
chain.  Active states put a beta prior on the branch probability; stopping
states pin ``F(.|A) = H(.|A)`` for the whole subtree.  Everything runs in
the likelihood-ratio form, so a stopping state contributes ``eta = 1``
whatever likelihood the tree was built for.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import betaln, logsumexp

from .base import BaseMeasure
from .errors import InvalidPrior, NumericalUnderflow, OutOfDomain
from .partition import PartitionNode
from .polya import _as_queries
from .rng import stream


@dataclass(frozen=True)
class StateModel:
    """Prior over latent node states.

    Parameters
    ----------
    base : BaseMeasure
    transition : array_like
        ``(S, S)`` prior transition matrix, or ``(L, S, S)`` per tree level
        with the last level repeated below ``L``.
    concentration : sequence
        One entry per state: a constant or per-level schedule; ignored for
        stopping states.
    stopping : sequence of bool
    root_state : int
        State of the virtual parent of the root.
    """

    base: BaseMeasure
    transition: np.ndarray
    concentration: tuple
    stopping: tuple
    root_state: int = 0

    def __post_init__(self):
        rho = np.asarray(self.transition, dtype=float)
        if rho.ndim == 2:
            rho = rho[None]
        object.__setattr__(self, "transition", rho)
        S = rho.shape[-1]
        if rho.shape[1] != S or len(self.stopping) != S or len(self.concentration) != S:
            raise InvalidPrior("transition, concentration and stopping sizes disagree")
        if np.any(rho < 0) or np.any(np.abs(rho.sum(axis=-1) - 1.0) > 1e-12):
            raise InvalidPrior("transition rows must be probability vectors")
        for s in range(S):
            if self.stopping[s]:
                if np.any(rho[:, s, s] != 1.0):
                    raise InvalidPrior(f"stopping state {s} must be absorbing")
            else:
                c = np.atleast_1d(np.asarray(self.concentration[s], dtype=float))
                if c.size == 0 or np.any(~np.isfinite(c)) or np.any(c <= 0):
                    raise InvalidPrior(f"state {s} needs a positive concentration")
        if not 0 <= self.root_state < S:
            raise InvalidPrior("root_state out of range")

    @classmethod
    def opt(cls, base, stop_prob=0.5, concentration=2.0):
        """Two-state optional Polya tree: state 1 stops with prior probability ``stop_prob``."""
        rho = np.array([[1.0 - stop_prob, stop_prob], [0.0, 1.0]])
        return cls(base, rho, (concentration, None), (False, True))

    @classmethod
    def single(cls, base, concentration=2.0):
        """One active state: the plain Polya tree."""
        return cls(base, np.ones((1, 1)), (concentration,), (False,))

    @property
    def n_states(self):
        return self.transition.shape[-1]

    def rho_at(self, depth):
        return self.transition[min(depth, self.transition.shape[0] - 1)]

    def c_at(self, s, depth):
        c = self.concentration[s]
        if np.isscalar(c):
            return float(c)
        return float(c[min(depth, len(c) - 1)])

    def to_dict(self):
        return {
            "base": self.base.to_dict(),
            "transition": self.transition.tolist(),
            "concentration": [c if c is None or np.isscalar(c) else list(c)
                              for c in self.concentration],
            "stopping": list(self.stopping),
            "root_state": self.root_state,
        }

    @classmethod
    def from_dict(cls, d):
        conc = tuple(c if c is None or np.isscalar(c) else tuple(c) for c in d["concentration"])
        return cls(BaseMeasure.from_dict(d["base"]), np.asarray(d["transition"]),
                   conc, tuple(d["stopping"]), d["root_state"])


@dataclass
class FlatTree:
    """Array view of a partition tree, indexed by preorder number."""

    nodes: list
    depth: np.ndarray
    internal: np.ndarray
    left: np.ndarray
    right: np.ndarray
    nl: np.ndarray
    nr: np.ndarray
    hl: np.ndarray
    hr: np.ndarray
    dim: np.ndarray
    cut: np.ndarray

    @classmethod
    def from_tree(cls, root: PartitionNode, base: BaseMeasure):
        nodes = list(root.iter_preorder())
        N = len(nodes)
        depth = np.array([n.depth for n in nodes], dtype=np.int64)
        internal = np.array([n.children is not None for n in nodes])
        left = np.full(N, -1, dtype=np.int64)
        right = np.full(N, -1, dtype=np.int64)
        nl = np.zeros(N)
        nr = np.zeros(N)
        dim = np.zeros(N, dtype=np.int64)
        cut = np.zeros(N)
        lo = np.zeros(N)
        hi = np.ones(N)
        for node in nodes:
            i = node.index
            if node.children is None:
                continue
            j = node.split.dimension
            left[i], right[i] = node.children[0].index, node.children[1].index
            nl[i], nr[i] = node.child_counts()
            dim[i], cut[i] = j, node.split.location
            lo[i], hi[i] = node.region.lower[j], node.region.upper[j]
        hl = np.full(N, 0.5)
        for j in range(base.dim):
            sel = internal & (dim == j)
            if np.any(sel):
                hl[sel] = base.conditional_mass(j, lo[sel], hi[sel], cut[sel])
        return cls(nodes, depth, internal, left, right, nl, nr, hl, 1.0 - hl, dim, cut)

    def split_mask(self, max_depth):
        return self.internal & (self.depth < max_depth)


def _log_rho(model, depths):
    with np.errstate(divide="ignore"):
        return np.log(np.stack([model.rho_at(int(t)) for t in depths]))


def state_alphas(model: StateModel, flat: FlatTree):
    """``(N, S)`` arrays of beta pseudo-counts; NaN for stopping states."""
    S = model.n_states
    c = np.full((len(flat.nodes), S), np.nan)
    for s in range(S):
        if not model.stopping[s]:
            c[:, s] = [model.c_at(s, int(t)) for t in flat.depth]
    return c * flat.hl[:, None], c * flat.hr[:, None]


@dataclass
class MessageTable:
    """Per-node log phi_s (indexed by parent state) and log eta_s (indexed by own state)."""

    flat: FlatTree
    log_phi: np.ndarray
    log_eta: np.ndarray
    max_depth: int
    log_varphi: np.ndarray = field(repr=False, default=None)

    @property
    def log_bayes_factor(self):
        return float(self.log_phi[0, 0]) if self.log_phi.shape[1] == 1 else None

    def root_log_phi(self, state):
        return float(self.log_phi[0, state])


def message_pass(root: PartitionNode, model: StateModel, mode=None,
                 max_depth: Optional[int] = None, flat: Optional[FlatTree] = None) -> MessageTable:
    """Bottom-up computation of log phi_s(A) for every node and parent state.

    ``mode`` is accepted for symmetry with the univariate kernel; the
    likelihood is fixed by how ``root`` was built.  Nodes at ``max_depth``
    (default: no truncation) are treated as leaves, which lets one tree
    built to the deepest level serve every shallower fit.
    """
    if flat is None:
        flat = FlatTree.from_tree(root, model.base)
    if max_depth is None:
        max_depth = int(flat.depth.max())
    N, S = len(flat.nodes), model.n_states
    al, ar = state_alphas(model, flat)
    split = flat.split_mask(max_depth)
    stop = np.asarray(model.stopping)

    log_eta = np.zeros((N, S))
    idx = np.flatnonzero(split)
    if np.any(al[idx][:, ~stop] <= 0):
        raise InvalidPrior("zero base mass produced a non-positive beta pseudo-count")
    nl, nr = flat.nl[idx, None], flat.nr[idx, None]
    a, b = al[idx][:, ~stop], ar[idx][:, ~stop]
    log_eta[np.ix_(idx, np.flatnonzero(~stop))] = (
        betaln(a + nl, b + nr) - betaln(a, b)
        - _nlog(nl, flat.hl[idx, None]) - _nlog(nr, flat.hr[idx, None]))

    log_phi = np.zeros((N, S))
    for t in range(max_depth - 1, -1, -1):
        lvl = idx[flat.depth[idx] == t]
        if lvl.size == 0:
            continue
        terms = log_eta[lvl] + log_phi[flat.left[lvl]] + log_phi[flat.right[lvl]]
        lr = _log_rho(model, [t])[0]
        log_phi[lvl] = logsumexp(lr[None, :, :] + terms[:, None, :], axis=2)

    if not np.all(np.isfinite(log_phi)):
        raise NumericalUnderflow("a marginal likelihood ratio collapsed to zero")

    log_vp = np.zeros((N, S, 2))
    tot = al + ar + (flat.nl + flat.nr)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        log_vp[:, :, 0] = np.log((al + flat.nl[:, None]) / tot) - np.log(flat.hl)[:, None]
        log_vp[:, :, 1] = np.log((ar + flat.nr[:, None]) / tot) - np.log(flat.hr)[:, None]
    log_vp[:, stop, :] = 0.0
    log_vp[~split] = 0.0
    return MessageTable(flat, log_phi, log_eta, max_depth, log_vp)


def _nlog(n, h):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(n == 0, 0.0, n * np.log(h))


@dataclass
class PosteriorTransition:
    """``log_P[i, s, s']`` = log P(S(A_i) = s' | S(parent) = s, x)."""

    log_P: np.ndarray

    @property
    def P(self):
        return np.exp(self.log_P)


def posterior_transitions(table: MessageTable, model: StateModel) -> PosteriorTransition:
    flat = table.flat
    N, S = len(flat.nodes), model.n_states
    split = flat.split_mask(table.max_depth)
    lr = _log_rho(model, flat.depth)
    terms = np.zeros((N, S))
    idx = np.flatnonzero(split)
    terms[idx] = (table.log_eta[idx] + table.log_phi[flat.left[idx]]
                  + table.log_phi[flat.right[idx]])
    log_P = lr + terms[:, None, :] - table.log_phi[:, :, None]
    return PosteriorTransition(log_P)


def branch_paths(table: MessageTable, q: np.ndarray):
    """``(Q, D + 1)`` preorder indices of the nodes along each query's branch, -1 padded."""
    flat = table.flat
    D = table.max_depth
    Q = q.shape[0]
    path = np.full((Q, D + 1), -1, dtype=np.int64)
    cur = np.zeros(Q, dtype=np.int64)
    path[:, 0] = 0
    alive = np.ones(Q, dtype=bool)
    split = flat.split_mask(D)
    for t in range(D):
        alive &= split[cur]
        if not np.any(alive):
            break
        a = np.flatnonzero(alive)
        node = cur[a]
        go_left = q[a, flat.dim[node]] <= flat.cut[node]
        cur[a] = np.where(go_left, flat.left[node], flat.right[node])
        path[a, t + 1] = cur[a]
    return path


def _check_domain(model, q):
    if np.any(q < model.base.lower) or np.any(q > model.base.upper):
        raise OutOfDomain("query outside the sample space")


def predictive_ratio_latent(table: MessageTable, trans: PosteriorTransition,
                            model: StateModel, q: np.ndarray) -> np.ndarray:
    """xi_{root state}(Omega) for each query, by the bottom-up xi_s recursion."""
    flat = table.flat
    path = branch_paths(table, q)
    Q, S = q.shape[0], model.n_states
    P = trans.P
    xi = np.ones((Q, S))
    for i in range(table.max_depth - 1, -1, -1):
        has = path[:, i + 1] >= 0
        if not np.any(has):
            continue
        a = np.flatnonzero(has)
        parent, child = path[a, i], path[a, i + 1]
        side = (child == flat.right[parent]).astype(np.int64)
        vp = np.exp(table.log_varphi[parent, :, side])
        xi[a] = np.einsum("qst,qt->qs", P[parent], vp * xi[a])
    return xi[:, model.root_state]


def predictive_density_latent(root: PartitionNode, model: StateModel, table: MessageTable,
                              query, trans: Optional[PosteriorTransition] = None) -> np.ndarray:
    """Exact posterior mean density at each query point."""
    q = _as_queries(query, model.base.dim)
    _check_domain(model, q)
    if trans is None:
        trans = posterior_transitions(table, model)
    return model.base.density(q) * predictive_ratio_latent(table, trans, model, q)


def state_marginals(table: MessageTable, trans: PosteriorTransition, model: StateModel):
    """``(N, S)`` posterior marginals P(S(A) = s | x), propagated top-down."""
    flat = table.flat
    N = len(flat.nodes)
    P = trans.P
    marg = np.zeros((N, model.n_states))
    marg[0] = P[0, model.root_state]
    for i in range(N):
        if flat.split_mask(table.max_depth)[i]:
            for c in (flat.left[i], flat.right[i]):
                marg[c] = marg[i] @ P[c]
    return marg


def sample_posterior_density_latent(table: MessageTable, trans: PosteriorTransition,
                                    model: StateModel, rng_seed, query_grid,
                                    draw: int = 0) -> np.ndarray:
    """One posterior density draw: states top-down, then conjugate betas."""
    flat = table.flat
    q = _as_queries(query_grid, model.base.dim)
    _check_domain(model, q)
    rng = stream(rng_seed, draw)
    N, S = len(flat.nodes), model.n_states
    split = flat.split_mask(table.max_depth)
    cum = np.cumsum(trans.P, axis=2)
    u = rng.random(N)
    state = np.full(N, -1, dtype=np.int64)
    parent_state = np.full(N, -1, dtype=np.int64)
    parent_state[0] = model.root_state
    stop = np.asarray(model.stopping)
    active = np.zeros(N, dtype=bool)
    for i in range(N):
        # preorder: a parent is always resolved before its children
        if not split[i] or parent_state[i] < 0:
            continue
        row = cum[i, parent_state[i]]
        s = min(int(np.searchsorted(row, u[i] * row[-1], side="right")), S - 1)
        state[i] = s
        if stop[s]:
            continue
        active[i] = True
        parent_state[flat.left[i]] = s
        parent_state[flat.right[i]] = s
    al, ar = state_alphas(model, flat)
    idx = np.flatnonzero(active)
    s_idx = state[idx]
    theta = rng.beta(al[idx, s_idx] + flat.nl[idx], ar[idx, s_idx] + flat.nr[idx])
    log_r = np.zeros((N, 2))
    log_r[idx, 0] = np.log(theta) - np.log(flat.hl[idx])
    log_r[idx, 1] = np.log1p(-theta) - np.log(flat.hr[idx])
    path = branch_paths(table, q)
    acc = np.zeros(q.shape[0])
    for i in range(table.max_depth):
        has = path[:, i + 1] >= 0
        parent, child = path[has, i], path[has, i + 1]
        side = (child == flat.right[parent]).astype(np.int64)
        acc[has] += log_r[parent, side]
    return model.base.density(q) * np.exp(acc)
