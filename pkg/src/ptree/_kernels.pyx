# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled kernels: multivariate node expansion, tree sampling, branch evaluation.

Mirrors ``_kernels_py`` call for call; both must produce identical output.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil
from libcpp.vector cimport vector
from libcpp.algorithm cimport nth_element

from .errors import NodeBudgetExceeded

cnp.import_array()

BACKEND = "cython"


cdef struct Store:
    vector[int] depth
    vector[int] n
    vector[double] lower
    vector[double] upper
    vector[double] cut
    vector[int] cnt
    vector[long] child


cdef class _Expander:
    cdef double[:, ::1] pts
    cdef int d, max_depth, leaf_size, partial, memoize
    cdef double p
    cdef long budget
    cdef long prune_count, memo_hits
    cdef Store s
    cdef dict memo

    def __init__(self, double[:, ::1] pts, int max_depth, int leaf_size, double p,
                 bint partial, bint memoize, long budget):
        self.pts = pts
        self.d = pts.shape[1]
        self.max_depth = max_depth
        self.leaf_size = leaf_size
        self.p = p
        self.partial = partial
        self.memoize = memoize
        self.budget = budget
        self.prune_count = 0
        self.memo_hits = 0
        self.memo = {}

    cdef long new_node(self, int depth, int n, vector[double]& lo, vector[double]& hi) except -1:
        cdef long i = self.s.depth.size()
        cdef int j
        if i >= self.budget:
            raise NodeBudgetExceeded(depth, self.budget)
        self.s.depth.push_back(depth)
        self.s.n.push_back(n)
        for j in range(self.d):
            self.s.lower.push_back(lo[j])
            self.s.upper.push_back(hi[j])
            self.s.cut.push_back(0.0)
            self.s.cnt.push_back(0)
            self.s.cnt.push_back(0)
            self.s.child.push_back(-1)
            self.s.child.push_back(-1)
        return i

    cdef long grow(self, vector[int]& idx, vector[double]& lo, vector[double]& hi,
                   vector[int]& level, vector[long]& pos, int depth) except -2:
        cdef int d = self.d
        cdef int m = idx.size()
        cdef int j, t, k, side
        cdef long node, c
        cdef double x, cj
        cdef object key = None
        if not self.partial and self.memoize:
            key = (tuple([level[j] for j in range(d)]), tuple([pos[j] for j in range(d)]))
            hit = self.memo.get(key)
            if hit is not None:
                self.memo_hits += 1
                return hit
        node = self.new_node(depth, m, lo, hi)
        if key is not None:
            self.memo[key] = node
        if m <= self.leaf_size or depth >= self.max_depth:
            if m <= self.leaf_size and depth < self.max_depth:
                self.prune_count += 1
            return node

        cdef vector[double] cuts = vector[double](d)
        cdef vector[double] tmp
        cdef vector[char] removed = vector[char](m, 0)
        if self.partial:
            k = <int>ceil(m * self.p)
            if k < 1:
                k = 1
            if k > m:
                k = m
            tmp.resize(m)
            for j in range(d):
                for t in range(m):
                    tmp[t] = self.pts[idx[t], j]
                nth_element(tmp.begin(), tmp.begin() + (k - 1), tmp.end())
                cuts[j] = tmp[k - 1]
                # an anchor on the node boundary leaves a zero-mass child
                if cuts[j] <= lo[j] or cuts[j] >= hi[j]:
                    return node
            for t in range(m):
                for j in range(d):
                    if self.pts[idx[t], j] == cuts[j]:
                        removed[t] = 1
        else:
            for j in range(d):
                cuts[j] = 0.5 * (lo[j] + hi[j])

        cdef vector[int] left, right
        cdef vector[double] clo, chi
        cdef vector[int] clevel
        cdef vector[long] cpos
        for j in range(d):
            self.s.cut[node * d + j] = cuts[j]
        for j in range(d):
            left.clear()
            right.clear()
            cj = cuts[j]
            for t in range(m):
                if removed[t]:
                    continue
                x = self.pts[idx[t], j]
                if self.partial:
                    if x < cj:
                        left.push_back(idx[t])
                    elif x > cj:
                        right.push_back(idx[t])
                elif x <= cj:
                    left.push_back(idx[t])
                else:
                    right.push_back(idx[t])
            self.s.cnt[(node * d + j) * 2] = left.size()
            self.s.cnt[(node * d + j) * 2 + 1] = right.size()
            clevel = level
            clevel[j] += 1
            for side in range(2):
                clo = lo
                chi = hi
                cpos = pos
                if side == 0:
                    chi[j] = cj
                    cpos[j] = 2 * pos[j]
                    c = self.grow(left, clo, chi, clevel, cpos, depth + 1)
                else:
                    clo[j] = cj
                    cpos[j] = 2 * pos[j] + 1
                    c = self.grow(right, clo, chi, clevel, cpos, depth + 1)
                self.s.child[(node * d + j) * 2 + side] = c
        return node

    def run(self, lower, upper):
        cdef int d = self.d
        cdef int j
        cdef vector[int] idx = vector[int](self.pts.shape[0])
        cdef vector[double] lo = vector[double](d)
        cdef vector[double] hi = vector[double](d)
        cdef vector[int] level = vector[int](d, 0)
        cdef vector[long] pos = vector[long](d, 0)
        for j in range(self.pts.shape[0]):
            idx[j] = j
        for j in range(d):
            lo[j] = lower[j]
            hi[j] = upper[j]
        self.grow(idx, lo, hi, level, pos, 0)
        N = self.s.depth.size()
        out = {
            "depth": np.asarray(<int[:N]> self.s.depth.data(), dtype=np.int64).copy() if N else np.zeros(0, np.int64),
            "n": np.asarray(<int[:N]> self.s.n.data(), dtype=np.int64).copy(),
            "lower": np.asarray(<double[:N * d]> self.s.lower.data()).reshape(N, d).copy(),
            "upper": np.asarray(<double[:N * d]> self.s.upper.data()).reshape(N, d).copy(),
            "cut": np.asarray(<double[:N * d]> self.s.cut.data()).reshape(N, d).copy(),
            "cnt": np.asarray(<int[:N * d * 2]> self.s.cnt.data(), dtype=np.int64).reshape(N, d, 2).copy(),
            "child": np.asarray(<long[:N * d * 2]> self.s.child.data(), dtype=np.int64).reshape(N, d, 2).copy(),
            "prune_count": self.prune_count,
            "memo_hits": self.memo_hits,
        }
        return out


def expand(points, lower, upper, int max_depth, int leaf_size, double p,
           bint partial, bint memoize=True, long budget=2_000_000):
    """Enumerate every node reachable by some sequence of axis choices.

    Returns a dict of flat arrays in preorder (first-visit order).
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    ex = _Expander(pts, max_depth, leaf_size, p, partial, memoize, budget)
    return ex.run(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))


def sample_tree(const double[:, :, ::1] cum, const long[:, :, ::1] child,
                const unsigned char[::1] split, const unsigned char[::1] stop,
                const double[::1] u, int root_state):
    """Draw (axis, state) top-down from cumulative joint posterior rows.

    ``cum[i, s]`` is the running sum over the flattened (axis, state) pairs
    given parent state s.  One uniform is consumed per visited split node in
    preorder.  Returns the active (non-stopping) split nodes with their axis
    and state, in preorder.
    """
    cdef int S = stop.shape[0]
    cdef int K = cum.shape[2]
    cdef int d = K // S
    cdef vector[long] stack_node
    cdef vector[int] stack_state
    cdef vector[long] out_node
    cdef vector[int] out_j, out_s
    cdef long node, used = 0
    cdef int ps, r, lo, hi, mid, j, s
    cdef double target
    stack_node.push_back(0)
    stack_state.push_back(root_state)
    while stack_node.size():
        node = stack_node.back()
        ps = stack_state.back()
        stack_node.pop_back()
        stack_state.pop_back()
        if not split[node]:
            continue
        if used >= u.shape[0]:
            raise ValueError("ran out of uniforms while sampling a tree")
        target = u[used] * cum[node, ps, K - 1]
        used += 1
        lo = 0
        hi = K - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[node, ps, mid] > target:
                hi = mid
            else:
                lo = mid + 1
        r = lo
        j = r // S
        s = r % S
        if stop[s]:
            continue
        out_node.push_back(node)
        out_j.push_back(j)
        out_s.push_back(s)
        stack_node.push_back(child[node, j, 1])
        stack_state.push_back(s)
        stack_node.push_back(child[node, j, 0])
        stack_state.push_back(s)
    M = out_node.size()
    nodes = np.empty(M, dtype=np.int64)
    js = np.empty(M, dtype=np.int64)
    ss = np.empty(M, dtype=np.int64)
    cdef long[::1] nv = nodes
    cdef long[::1] jv = js
    cdef long[::1] sv = ss
    cdef long t
    for t in range(M):
        nv[t] = out_node[t]
        jv[t] = out_j[t]
        sv[t] = out_s[t]
    return nodes, js, ss, used


def eval_tree(const double[:, ::1] q, const long[::1] nodes, const long[::1] js,
              const double[:, ::1] log_ratio, const double[:, ::1] cut,
              const long[:, :, ::1] child, long n_nodes):
    """Sum of per-branch log ratios down a sampled tree for every query row."""
    cdef long Q = q.shape[0]
    cdef long M = nodes.shape[0]
    cdef long[::1] slot = np.full(n_nodes, -1, dtype=np.int64)
    cdef long t, node, k
    cdef int j, side
    cdef double acc
    out = np.zeros(Q)
    cdef double[::1] ov = out
    for t in range(M):
        slot[nodes[t]] = t
    for t in range(Q):
        node = 0
        acc = 0.0
        while True:
            k = slot[node]
            if k < 0:
                break
            j = js[k]
            side = 0 if q[t, j] <= cut[node, j] else 1
            acc += log_ratio[k, side]
            node = child[node, j, side]
        ov[t] = acc
    return out
