"""Monte Carlo risk study of partial- versus full-likelihood tree estimators.

Each replicate draws one sample per sample size, fits every likelihood mode
at every depth on that same sample, and scores the posterior mean density
against the truth on a midpoint grid.  All randomness derives from the
master seed, the replicate index and the sample size, so a report is a
pure function of its plan whatever the worker count.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .base import BaseMeasure
from .densities import scenario
from .errors import ConfigError, GridMismatch, PTreeError
from .io import fmt
from .markov import FlatTree, message_pass, posterior_transitions, predictive_ratio_latent
from .model import make_state_model
from .multivariate import SplitPrior, expand_and_pass, posterior_mean_mc
from .partition import Dataset, build_fixed_tree, build_partial_tree
from .quadrature import midpoint_grid
from .rng import child_seed

METRICS = ("L1", "L2", "Linf")
MODES = ("partial", "full")
RISK_HEADER = ("scenario", "n", "depth", "mode", "replicate", "metric", "loss")
AGGREGATE_HEADER = ("scenario", "n", "depth", "mode", "metric", "count", "mean_log_loss",
                    "se_log_loss")
DEFAULT_GRID = {1: 4096, 2: 256}
MC_STREAM = 1


def loss(estimate, truth, metric, cell_volume):
    """Grid distance between two densities by the midpoint rule.

    ``cell_volume`` is a scalar or an array congruent with the grids.
    """
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise GridMismatch(f"estimate grid {est.shape} does not match truth grid {tru.shape}")
    diff = np.abs(est - tru)
    if metric == "L1":
        return float(np.sum(diff * cell_volume))
    if metric == "L2":
        return float(np.sqrt(np.sum(diff * diff * cell_volume)))
    if metric == "Linf":
        return float(diff.max()) if diff.size else 0.0
    raise ValueError(f"unknown metric {metric!r}")


@dataclass(frozen=True)
class ExperimentPlan:
    """One scenario's risk study.

    ``grid`` is the number of cells per axis (by dimension when ``None``);
    ``mc_trees`` is the number of sampled trees per bivariate fit.
    """

    scenario: str
    sizes: Tuple[int, ...] = (500,)
    depths: Tuple[int, ...] = tuple(range(1, 13))
    modes: Tuple[str, ...] = MODES
    replicates: int = 20
    seed: int = 0
    grid: Optional[int] = None
    metrics: Tuple[str, ...] = ("L2",)
    mc_trees: int = 200
    states: int = 2
    stop_prob: float = 0.5
    concentration: float = 2.0

    def validate(self):
        dens = scenario(self.scenario)
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ConfigError("sample sizes must be positive")
        if not self.depths or any(t < 0 for t in self.depths):
            raise ConfigError("depths must be nonnegative")
        if list(self.depths) != sorted(set(self.depths)):
            raise ConfigError("depths must be strictly ascending")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ConfigError(f"modes must be drawn from {MODES}")
        if not self.metrics or any(m not in METRICS for m in self.metrics):
            raise ConfigError(f"metrics must be drawn from {METRICS}")
        if self.grid_cells(dens.dimension) < 64:
            raise ConfigError("grid resolution must be at least 64 cells per axis")
        if self.mc_trees < 1:
            raise ConfigError("mc_trees must be >= 1")
        if self.states not in (1, 2):
            raise ConfigError("states must be 1 or 2")
        if not 0.0 <= self.stop_prob <= 1.0:
            raise ConfigError("stop_prob must lie in [0, 1]")
        if not (math.isfinite(self.concentration) and self.concentration > 0):
            raise ConfigError("concentration must be positive")
        return self

    def grid_cells(self, dim):
        return DEFAULT_GRID[dim] if self.grid is None else int(self.grid)


Row = Tuple[str, int, int, str, int, str, float]


@dataclass
class RiskReport:
    rows: List[Row] = field(default_factory=list)

    def aggregates(self):
        """Mean and standard error of log loss per (scenario, n, depth, mode, metric)."""
        groups = {}
        for sc, n, t, mode, _, metric, val in self.rows:
            groups.setdefault((sc, n, t, mode, metric), []).append(val)
        out = []
        for key, vals in groups.items():
            with np.errstate(divide="ignore"):
                logs = np.log(np.asarray(vals))
            se = float(np.std(logs, ddof=1) / np.sqrt(logs.size)) if logs.size > 1 else float("nan")
            out.append(key + (len(vals), float(np.mean(logs)), se))
        return out

    def mean_log_loss(self, n, depth, mode, metric="L2"):
        for sc, nn, t, m, met, _, mean, _ in self.aggregates():
            if (nn, t, m, met) == (n, depth, mode, metric):
                return mean
        raise KeyError((n, depth, mode, metric))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RISK_HEADER)
            for sc, n, t, mode, r, metric, val in self.rows:
                w.writerow([sc, n, t, mode, r, metric, fmt(val)])

    def write_aggregate_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGGREGATE_HEADER)
            for sc, n, t, mode, metric, count, mean, se in self.aggregates():
                w.writerow([sc, n, t, mode, metric, count, fmt(mean), fmt(se)])


def _estimates_1d(x, plan, mode, grid, model):
    data = Dataset.unit(x, 1)
    D = max(plan.depths)
    root = build_partial_tree(data, D) if mode == "partial" else build_fixed_tree(data, D)
    flat = FlatTree.from_tree(root, model.base)
    h = model.base.density(grid.points)
    for t in plan.depths:
        table = message_pass(root, model, max_depth=t, flat=flat)
        trans = posterior_transitions(table, model)
        yield t, h * predictive_ratio_latent(table, trans, model, grid.points)


def _estimates_2d(x, plan, mode, grid, model, mc_seed):
    data = Dataset.unit(x, 2)
    post = expand_and_pass(data, model, SplitPrior.uniform(2), max(plan.depths), mode)
    for t in plan.depths:
        sub = post if t == post.max_depth else post.truncate(t)
        yield t, posterior_mean_mc(sub, plan.mc_trees, grid.points, child_seed(mc_seed, t)).mean


def run_replicate(plan: ExperimentPlan, n: int, r: int) -> List[Row]:
    dens = scenario(plan.scenario)
    d = dens.dimension
    grid = midpoint_grid(plan.grid_cells(d), dens.lower, dens.upper)
    truth = dens.pdf(grid.points)
    vol = grid.weights
    base = BaseMeasure.uniform(dens.lower, dens.upper)
    model = make_state_model(base, plan.states, plan.stop_prob, plan.concentration)
    x = dens.sample(n, child_seed(plan.seed, r, n))
    # same Monte Carlo stream for every mode in a replicate
    mc_seed = child_seed(plan.seed, r, n, MC_STREAM)
    rows = []
    for mode in plan.modes:
        try:
            if d == 1:
                ests = _estimates_1d(x, plan, mode, grid, model)
            else:
                ests = _estimates_2d(x, plan, mode, grid, model, mc_seed)
            for t, est in ests:
                for metric in plan.metrics:
                    rows.append((plan.scenario, n, t, mode, r, metric,
                                 loss(est, truth, metric, vol)))
        except PTreeError as e:
            e.args = (f"[{plan.scenario} n={n} replicate={r} mode={mode}] {e}",)
            raise
    return rows


def _job(args):
    return run_replicate(*args)


def run_plan(plan: ExperimentPlan, threads: int = 1) -> RiskReport:
    """Run every (sample size, replicate) cell; rows come back in a fixed order."""
    plan.validate()
    jobs = [(plan, n, r) for n in plan.sizes for r in range(plan.replicates)]
    if threads <= 1 or len(jobs) == 1:
        parts = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_job, jobs))
    report = RiskReport()
    for part in parts:
        report.rows.extend(part)
    return report


PLAN_KEYS = {
    "scenario": str,
    "sizes": "ints",
    "depths": "ints",
    "modes": "strs",
    "replicates": int,
    "seed": int,
    "grid": int,
    "metrics": "strs",
    "mc_trees": int,
    "states": int,
    "stop_prob": float,
    "concentration": float,
}


def _ints(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1) if not part.startswith("-") else (part, "")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def parse_plan(text) -> ExperimentPlan:
    """Parse a flat ``key = value`` plan.

    Lists are comma separated; integer lists also accept ranges such as
    ``1-12``.  Blank lines and ``#`` comments are ignored.  Raises
    :class:`DataParseError` for malformed lines and :class:`ConfigError` for
    unknown keys or invalid values.
    """
    from .errors import DataParseError

    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataParseError(lineno, f"expected key = value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in PLAN_KEYS:
            raise ConfigError(f"line {lineno}: unknown plan key {key!r}")
        kind = PLAN_KEYS[key]
        try:
            if kind == "ints":
                values[key] = _ints(val)
            elif kind == "strs":
                values[key] = tuple(s.strip() for s in val.split(",") if s.strip())
            else:
                values[key] = kind(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {val!r} for {key}") from None
    if "scenario" not in values:
        raise ConfigError("plan must name a scenario")
    return ExperimentPlan(**values)


def with_overrides(plan: ExperimentPlan, **kw) -> ExperimentPlan:
    return replace(plan, **{k: v for k, v in kw.items() if v is not None})
