"""Compare the compiled and numpy kernels on a bivariate expansion workload.

Usage::

    python3 benchmarks/bench_kernels.py [--n 5000] [--depth 8] [--trees 200]

Both backends must give identical expansions and tree draws; the script
checks that before reporting timings.
"""

import argparse
import time

import numpy as np

from ptree import _kernels_py
from ptree.densities import scenario
from ptree.markov import StateModel
from ptree.base import BaseMeasure
from ptree.multivariate import SplitPrior, message_pass_joint, Expansion, _cum_rows
from ptree.polya import Likelihood

try:
    from ptree import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _time(fn, repeat=3):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _workload(k, x, depth, partial):
    ex_raw = k.expand(x, np.zeros(2), np.ones(2), depth, 2 if partial else 1, 0.5, partial,
                      True, 10_000_000)
    ex = Expansion(ex_raw["depth"], ex_raw["n"], ex_raw["lower"], ex_raw["upper"],
                   ex_raw["cut"], ex_raw["cnt"], ex_raw["child"],
                   Likelihood.PARTIAL if partial else Likelihood.FULL, depth)
    return ex


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--trees", type=int, default=200)
    ap.add_argument("--grid", type=int, default=256)
    args = ap.parse_args()

    x = scenario("gbeta1").sample(args.n, 1)
    model = StateModel.opt(BaseMeasure.uniform([0, 0], [1, 1]))
    g = (np.arange(args.grid) + 0.5) / args.grid
    q = np.ascontiguousarray(np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2))
    backends = [("python", _kernels_py)]
    if _kernels_c is not None:
        backends.insert(0, ("cython", _kernels_c))
    print(f"n={args.n} depth={args.depth} trees={args.trees} grid={args.grid}^2")
    ref = {}
    for mode, partial in (("partial", True), ("full", False)):
        for name, k in backends:
            t_exp, ex = _time(lambda: _workload(k, x, args.depth, partial), 1)
            post = message_pass_joint(ex, model, SplitPrior.uniform(2))
            cum = _cum_rows(post)
            rng = np.random.default_rng(0)
            us = rng.random((args.trees, min(2 ** (args.depth + 1), ex.n_nodes + 1)))

            def draw_and_eval():
                acc = np.zeros(q.shape[0])
                draws = []
                for u in us:
                    nodes, js, ss, _ = k.sample_tree(cum, post._child, post._split_u8,
                                                     post._stop_u8, u, 0)
                    lr = np.ascontiguousarray(post.log_varphi[nodes, js, ss])
                    acc += k.eval_tree(q, nodes, js, lr, post._cut, post._child, ex.n_nodes)
                    draws.append(nodes)
                return acc, draws

            t_mc, (acc, draws) = _time(draw_and_eval, 1)
            key = mode
            if key in ref:
                same = (np.array_equal(ref[key][0], ex.child) and np.array_equal(ref[key][1], acc)
                        and all(np.array_equal(a, b) for a, b in zip(ref[key][2], draws)))
                status = "identical" if same else "MISMATCH"
            else:
                ref[key] = (ex.child, acc, draws)
                status = "reference"
            print(f"{mode:8s} {name:7s} nodes={ex.n_nodes:8d} expand={t_exp:8.3f}s "
                  f"sample+eval={t_mc:8.3f}s  {status}")


if __name__ == "__main__":
    main()
