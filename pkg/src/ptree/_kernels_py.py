"""Pure Python/numpy fallback for the compiled kernels in ``_kernels.pyx``."""

import math

import numpy as np

from .errors import NodeBudgetExceeded

BACKEND = "python"


def expand(points, lower, upper, max_depth, leaf_size, p, partial,
           memoize=True, budget=2_000_000):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    d = pts.shape[1]
    depth, n, lo_l, hi_l, cut_l, cnt_l, child_l = [], [], [], [], [], [], []
    memo = {}
    stats = {"prune_count": 0, "memo_hits": 0}

    def new_node(t, m, lo, hi):
        i = len(depth)
        if i >= budget:
            raise NodeBudgetExceeded(t, budget)
        depth.append(t)
        n.append(m)
        lo_l.append(lo.copy())
        hi_l.append(hi.copy())
        cut_l.append(np.zeros(d))
        cnt_l.append(np.zeros((d, 2), dtype=np.int64))
        child_l.append(np.full((d, 2), -1, dtype=np.int64))
        return i

    def grow(idx, lo, hi, level, pos, t):
        m = idx.size
        key = None
        if not partial and memoize:
            key = (tuple(level), tuple(pos))
            hit = memo.get(key)
            if hit is not None:
                stats["memo_hits"] += 1
                return hit
        node = new_node(t, m, lo, hi)
        if key is not None:
            memo[key] = node
        if m <= leaf_size or t >= max_depth:
            if m <= leaf_size and t < max_depth:
                stats["prune_count"] += 1
            return node
        sub = pts[idx]
        if partial:
            k = min(max(int(math.ceil(m * p)), 1), m)
            cuts = np.array([np.partition(sub[:, j], k - 1)[k - 1] for j in range(d)])
            # an anchor on the node boundary leaves a zero-mass child
            if np.any(cuts <= lo) or np.any(cuts >= hi):
                return node
            keep = ~np.any(sub == cuts, axis=1)
        else:
            cuts = 0.5 * (lo + hi)
            keep = np.ones(m, dtype=bool)
        cut_l[node][:] = cuts
        for j in range(d):
            col = sub[:, j]
            if partial:
                lmask, rmask = keep & (col < cuts[j]), keep & (col > cuts[j])
            else:
                lmask = col <= cuts[j]
                rmask = ~lmask
            cnt_l[node][j] = (np.count_nonzero(lmask), np.count_nonzero(rmask))
            clevel = list(level)
            clevel[j] += 1
            for side, mask in enumerate((lmask, rmask)):
                clo, chi, cpos = lo.copy(), hi.copy(), list(pos)
                if side == 0:
                    chi[j] = cuts[j]
                else:
                    clo[j] = cuts[j]
                cpos[j] = 2 * pos[j] + side
                child_l[node][j, side] = grow(idx[mask], clo, chi, clevel, cpos, t + 1)
        return node

    grow(np.arange(pts.shape[0]), np.asarray(lower, dtype=float).copy(),
         np.asarray(upper, dtype=float).copy(), [0] * d, [0] * d, 0)
    return {
        "depth": np.array(depth, dtype=np.int64),
        "n": np.array(n, dtype=np.int64),
        "lower": np.array(lo_l).reshape(-1, d),
        "upper": np.array(hi_l).reshape(-1, d),
        "cut": np.array(cut_l).reshape(-1, d),
        "cnt": np.array(cnt_l).reshape(-1, d, 2),
        "child": np.array(child_l).reshape(-1, d, 2),
        **stats,
    }


def sample_tree(cum, child, split, stop, u, root_state):
    S = len(stop)
    K = cum.shape[2]
    stack = [(0, root_state)]
    nodes, js, ss = [], [], []
    used = 0
    while stack:
        node, ps = stack.pop()
        if not split[node]:
            continue
        if used >= len(u):
            raise ValueError("ran out of uniforms while sampling a tree")
        row = cum[node, ps]
        r = min(int(np.searchsorted(row, u[used] * row[K - 1], side="right")), K - 1)
        used += 1
        j, s = divmod(r, S)
        if stop[s]:
            continue
        nodes.append(node)
        js.append(j)
        ss.append(s)
        stack.append((child[node, j, 1], s))
        stack.append((child[node, j, 0], s))
    return (np.array(nodes, dtype=np.int64), np.array(js, dtype=np.int64),
            np.array(ss, dtype=np.int64), used)


def eval_tree(q, nodes, js, log_ratio, cut, child, n_nodes):
    slot = np.full(n_nodes, -1, dtype=np.int64)
    slot[nodes] = np.arange(nodes.size)
    Q = q.shape[0]
    out = np.zeros(Q)
    cur = np.zeros(Q, dtype=np.int64)
    live = np.arange(Q)
    while live.size:
        k = slot[cur[live]]
        ok = k >= 0
        live, k = live[ok], k[ok]
        if not live.size:
            break
        node = cur[live]
        j = js[k]
        side = (q[live, j] > cut[node, j]).astype(np.int64)
        out[live] += log_ratio[k, side]
        cur[live] = child[node, j, side]
    return out
