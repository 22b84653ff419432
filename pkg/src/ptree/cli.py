"""Command-line interface: ``ptree fit|predict|simulate|benchmark|scenarios``.

Exit codes: 0 success, 2 unparsable input (with its line number),
3 invalid configuration or unknown model version, scenario or plan key,
4 numeric failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .densities import list_scenarios, scenario
from .errors import (ConfigError, DataParseError, DepthNegative, DomainError, EmptyDomain,
                     InvalidPrior, ModelVersionError, NodeBudgetExceeded, NumericalUnderflow,
                     OutOfDomain, PTreeError, UnknownScenario, ZeroMass)
from .io import read_csv, write_csv
from .model import fit_model, predict_bands, predict_mean
from .polya import Likelihood
from .quadrature import midpoint_grid
from .risk import parse_plan, run_plan, with_overrides
from .serialize import load_model, save_model, summary

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4

_CONFIG_ERRORS = (ConfigError, ModelVersionError, UnknownScenario, InvalidPrior, DepthNegative,
                  EmptyDomain, OutOfDomain, DomainError, NodeBudgetExceeded, ValueError)
_NUMERIC_ERRORS = (NumericalUnderflow, ZeroMass, FloatingPointError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _bounds(args, d):
    if args.bounds is None:
        return np.zeros(d), np.ones(d)
    b = _floats(args.bounds)
    if len(b) != 2 * d:
        raise ConfigError(f"--bounds needs {2 * d} numbers (lower then upper per axis)")
    return np.array(b[:d]), np.array(b[d:])


def _check_positive(name, value, allow_zero=False):
    if value is None:
        return
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}")


def cmd_fit(args):
    if args.input is None:
        raise ConfigError("fit needs --input")
    pts, header, lines = read_csv(args.input, args.dim)
    d = pts.shape[1]
    lower, upper = _bounds(args, d)
    bad = np.flatnonzero(np.any((pts < lower) | (pts > upper), axis=1))
    if bad.size:
        raise DataParseError(int(lines[bad[0]]), "observation outside the sample space")
    if args.max_depth < 0:
        raise ConfigError("--max-depth must be >= 0")
    if not 0.0 <= args.stop_prob <= 1.0:
        raise ConfigError("--stop-prob must lie in [0, 1]")
    _check_positive("--concentration", args.concentration)
    if args.states not in (1, 2):
        raise ConfigError("--states must be 1 or 2")
    weights = None if args.split_weights is None else _floats(args.split_weights)
    post = fit_model(pts, lower, upper, args.mode, args.max_depth, args.states, args.stop_prob,
                     args.concentration, weights, args.leaf_size)
    if args.output:
        save_model(post, args.output)
    print(json.dumps(summary(post, pts.shape[0])))
    return EXIT_OK


def _queries(args, post):
    lower, upper = post.model.base.lower, post.model.base.upper
    if args.query is not None:
        q, _, _ = read_csv(args.query, post.dim)
        return q
    cells = 64 if args.grid is None else args.grid
    if cells < 1:
        raise ConfigError("--grid must be >= 1")
    return midpoint_grid(cells, lower, upper).points


def cmd_predict(args):
    model_path = args.model or args.input
    if model_path is None:
        raise ConfigError("predict needs --model (or --input) pointing at a model file")
    if args.model is not None and args.input is not None and args.query is None:
        args.query = args.input
    post = load_model(model_path)
    q = _queries(args, post)
    seed = 0 if args.seed is None else args.seed
    _check_positive("--mc-trees", args.mc_trees)
    mean = predict_mean(post, q, args.mc_trees, seed)
    cols = [q[:, j] for j in range(post.dim)] + [mean]
    header = [f"x{j + 1}" for j in range(post.dim)] + ["density"]
    if args.draws:
        probs = (0.025, 0.975) if args.quantiles is None else _floats(args.quantiles)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ConfigError("--quantiles must lie in [0, 1]")
        bands = predict_bands(post, q, args.draws, probs, seed)
        cols += list(bands)
        header += [f"q{p:g}" for p in probs]
    out = _open_out(args.output)
    try:
        write_csv(out, header, cols)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_simulate(args):
    dens = scenario(args.scenario)
    if args.n is None or args.n < 0:
        raise ConfigError("simulate needs --n >= 0")
    seed = 0 if args.seed is None else args.seed
    x = dens.sample(args.n, seed)
    out = _open_out(args.output)
    try:
        write_csv(out, [f"x{j + 1}" for j in range(dens.dimension)],
                  [x[:, j] for j in range(dens.dimension)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_benchmark(args):
    if args.seed is None:
        raise ConfigError("benchmark needs an explicit --seed")
    plan_path = args.plan or args.input
    if plan_path is None:
        raise ConfigError("benchmark needs --plan")
    text = Path(plan_path).read_text()
    plan = with_overrides(parse_plan(text), seed=args.seed, mc_trees=args.mc_trees,
                          grid=args.grid)
    plan.validate()
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    report = run_plan(plan, threads)
    out = Path(args.output or "risk.csv")
    agg = Path(args.aggregate) if args.aggregate else out.with_name(out.stem + "_aggregate.csv")
    report.write_csv(out)
    report.write_aggregate_csv(agg)
    print(f"wrote {len(report.rows)} rows to {out} and aggregates to {agg}")
    return EXIT_OK


def cmd_scenarios(args):
    for name, dim in list_scenarios():
        print(f"{name}\t{dim}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="ptree", description="Partial-likelihood Polya tree density estimation")
    p.add_argument("--version", action="version", version=f"ptree {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--input")
        sp.add_argument("--output")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)

    f = sub.add_parser("fit", help="fit a model to CSV data")
    common(f)
    f.add_argument("--mode", choices=[m.value for m in Likelihood], default="partial")
    f.add_argument("--max-depth", type=int, default=10)
    f.add_argument("--states", type=int, default=2)
    f.add_argument("--stop-prob", type=float, default=0.5)
    f.add_argument("--concentration", type=float, default=2.0)
    f.add_argument("--split-weights")
    f.add_argument("--leaf-size", type=int)
    f.add_argument("--bounds", help="lower bounds then upper bounds, comma separated")
    f.add_argument("--dim", type=int, help="number of columns when the input is empty")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="evaluate a fitted model")
    common(pr)
    pr.add_argument("--model")
    pr.add_argument("--query", help="CSV of query points")
    pr.add_argument("--grid", type=int, help="midpoint grid cells per axis")
    pr.add_argument("--mc-trees", type=int, default=200)
    pr.add_argument("--draws", type=int, default=0)
    pr.add_argument("--quantiles")
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("simulate", help="draw a sample from a reference density")
    common(s)
    s.add_argument("--scenario", required=True)
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="run a risk study from a plan file")
    common(b)
    b.add_argument("--plan")
    b.add_argument("--aggregate")
    b.add_argument("--mc-trees", type=int)
    b.add_argument("--grid", type=int)
    b.set_defaults(func=cmd_benchmark)

    sc = sub.add_parser("scenarios", help="list registered reference densities")
    sc.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required: fit, predict, simulate, benchmark, scenarios")
        return args.func(args)
    except DataParseError as e:
        print(f"ptree: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except json.JSONDecodeError as e:
        print(f"ptree: parse error: line {e.lineno}: {e.msg}", file=sys.stderr)
        return EXIT_PARSE
    except _CONFIG_ERRORS as e:
        print(f"ptree: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as e:
        print(f"ptree: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except PTreeError as e:
        print(f"ptree: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"ptree: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
