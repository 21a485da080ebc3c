"""Command line front door.

Subcommands: fit (selection + posterior summaries from CSV data), estimate
(point estimates only), simulate-fcr, demo-univariate, consistency. Every
command echoes its configuration into a key-value report; when --out is
given the report is written to that path and each command's plot-ready
table(s) and a rendered PNG figure are written alongside it.

Exit codes: 0 ok, 2 bad input, 3 selection/feasibility failure,
4 convergence failure, 5 internal error. Errors print a single
machine-parsable line on stderr. Logging level comes from the
SELECTIVE_BAYES_LOG environment variable (error, info or debug).
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .errors import (EXIT_INPUT, EXIT_OK, ContractViolationError,
                     EmptySelectionError, SelectiveBayesError)
from .estimation import general_mle, map_estimate, randomized_mle
from .experiments import (ConsistencyConfig, FcrConfig, FCR_METHODS,
                          consistency_experiment, run_fcr_experiment,
                          univariate_curves)
from .figures import (render_consistency_figure, render_estimate_figure,
                      render_fcr_figure, render_interval_figure,
                      render_univariate_figure)
from .model import GenerativeModel, Prior, TargetMap
from .posterior import (PosteriorSpec, credible_interval, posterior_mean,
                        sample_posterior)
from .report import content_hash, render_report
from .rng import task_rng
from .selection import selection_context

log = logging.getLogger(__name__)

_CATEGORY = {2: "input", 3: "selection", 4: "convergence", 5: "internal"}

_EPILOG = """\
exit codes:
  0  success
  2  bad input (files, dimensions, flags, priors, grids)
  3  selection failure (empty active set, infeasible event)
  4  convergence failure (solver or sampler)
  5  internal error

environment:
  SELECTIVE_BAYES_LOG   logging level: error (default), info, debug

seeding:
  --seed feeds counter-based Philox streams; stream i of root seed s is
  Philox(key=[s, i]). Reports are byte-identical across repeated runs and
  thread counts.
"""


def _parse_prior(text):
    if text == "flat":
        return Prior(kind="flat")
    if text == "mixture":
        return Prior(kind="mixture")
    if text.startswith("gaussian:"):
        try:
            tau2 = float(text.split(":", 1)[1])
        except ValueError:
            raise ContractViolationError(f"bad prior spec {text!r}")
        return Prior(kind="gaussian", tau2=tau2)
    raise ContractViolationError(
        f"prior must be flat, gaussian:<tau2> or mixture, got {text!r}")


def _load_csv(path):
    """CSV matrix with optional auto-detected header row; returns (array, sha1)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ContractViolationError(f"cannot read {path}: {e}")
    digest = content_hash(raw)
    text = raw.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ContractViolationError(f"{path} is empty")
    skip = 0
    try:
        [float(tok) for tok in lines[0].split(",")]
    except ValueError:
        skip = 1
    try:
        arr = np.loadtxt(io.StringIO("\n".join(lines[skip:])), delimiter=",",
                         ndmin=2)
    except ValueError as e:
        raise ContractViolationError(f"malformed CSV {path}: {e}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"{path} contains non-finite entries")
    return arr, digest


def _parse_grid(text):
    try:
        lo, hi, step = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise ContractViolationError(f"grid must be lo:hi:step, got {text!r}")
    if step <= 0 or hi <= lo:
        raise ContractViolationError(f"bad grid bounds {text!r}")
    return np.arange(lo, hi + step / 2.0, step)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def _emit(args, tree, tables, figure):
    """Write the report to --out (plus CSVs and a PNG) or to stdout."""
    text = render_report(tree)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        base, _ = os.path.splitext(args.out)
        for name, (header, rows) in tables.items():
            _write_csv(f"{base}_{name}.csv", header, rows)
        if figure is not None:
            figure(f"{base}.png")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)


def _regime(gamma2, carve_frac):
    if carve_frac is not None and gamma2 > 0:
        raise ContractViolationError("randomization and carving are exclusive")
    if carve_frac is not None:
        return "carved"
    if gamma2 > 0:
        return "randomized"
    return "plain"


def _select(args):
    X, xhash = _load_csv(args.x)
    y, yhash = _load_csv(args.y)
    y = y.reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ContractViolationError(
            f"y has {y.shape[0]} rows but X has {X.shape[0]}")
    regime = _regime(args.gamma2, args.carve_frac)
    rng = task_rng(args.seed or 0, 0)
    ctx, lasso_beta = selection_context(
        X, y, args.lam, gamma2=args.gamma2, rng=rng,
        holdout_fraction=args.carve_frac)
    X_E = X[:, list(ctx.E)]
    model = GenerativeModel(X_star=X_E, sigma2=1.0, X_E=X_E)
    inputs = {"x": {"path": args.x, "sha1": xhash},
              "y": {"path": args.y, "sha1": yhash}}
    return X, y, ctx, model, regime, inputs


def _selection_tree(ctx):
    return {"active_set": list(ctx.E),
            "signs": [int(s) for s in ctx.signs],
            "size": ctx.n_active,
            "lambda": float(ctx.lam),
            "boundary_warning": bool(ctx.boundary_warning)}


def _estimates(spec, y, gamma2):
    out = {}
    if spec.prior.kind != "mixture":
        res = map_estimate(spec)
        out["map"] = {"value": res.beta_hat, "residual": res.kkt_residual,
                      "iterations": res.iterations}
    if spec.prior.kind == "flat":
        res = general_mle(spec)
        out["mle"] = {"value": res.beta_hat, "residual": res.kkt_residual,
                      "iterations": res.iterations}
    if gamma2 > 0 and spec.prior.kind != "mixture":
        res = randomized_mle(y, spec)
        out["randomized_mle"] = {"value": res.beta_hat,
                                 "residual": res.kkt_residual,
                                 "iterations": res.iterations}
    return out


def cmd_fit(args):
    X, y, ctx, model, regime, inputs = _select(args)
    prior = _parse_prior(args.prior)
    spec = PosteriorSpec(model=model, prior=prior, ctx=ctx, regime=regime,
                         data=y)
    chain = sample_posterior(spec, n_draws=args.draws, burn_in=args.burn_in,
                             root_seed=args.seed, task_index=1)
    M = TargetMap(np.eye(ctx.n_active))
    ci = credible_interval(chain, M, args.level)
    mean = posterior_mean(chain, M)
    estimates = _estimates(spec, y, args.gamma2)

    tree = {
        "command": "fit",
        "config": {"lambda": args.lam, "gamma2": args.gamma2,
                   "carve_frac": args.carve_frac, "prior": args.prior,
                   "level": args.level, "draws": args.draws,
                   "burn_in": chain.burn_in, "seed": args.seed,
                   "regime": regime},
        "inputs": inputs,
        "selection": _selection_tree(ctx),
        "posterior": {"step": chain.step,
                      "mean": mean,
                      "lower": ci[:, 0], "upper": ci[:, 1]},
        "estimates": estimates,
    }
    names = [f"beta[{j}]" for j in ctx.E]
    rows = [(j, float(mean[i]), float(ci[i, 0]), float(ci[i, 1]))
            for i, j in enumerate(ctx.E)]
    tables = {"intervals": (("index", "mean", "lower", "upper"), rows)}

    def figure(path):
        render_interval_figure(names, ci[:, 0], ci[:, 1], mean, path)

    _emit(args, tree, tables, figure)
    return EXIT_OK


def cmd_estimate(args):
    if (args.gamma2 > 0 or args.carve_frac is not None) and args.seed is None:
        raise ContractViolationError("--seed is required for stochastic runs")
    X, y, ctx, model, regime, inputs = _select(args)
    prior = _parse_prior(args.prior)
    spec = PosteriorSpec(model=model, prior=prior, ctx=ctx, regime=regime,
                         data=y)
    estimates = _estimates(spec, y, args.gamma2)
    if not estimates:
        raise ContractViolationError(
            "no point estimate is defined for the mixture prior")
    tree = {
        "command": "estimate",
        "config": {"lambda": args.lam, "gamma2": args.gamma2,
                   "carve_frac": args.carve_frac, "prior": args.prior,
                   "seed": args.seed, "regime": regime},
        "inputs": inputs,
        "selection": _selection_tree(ctx),
        "estimates": estimates,
    }
    names = [f"beta[{j}]" for j in ctx.E]
    header = ["index"] + list(estimates)
    rows = [[j] + [float(estimates[k]["value"][i]) for k in estimates]
            for i, j in enumerate(ctx.E)]
    tables = {"estimates": (header, rows)}

    def figure(path):
        render_estimate_figure(
            names, {k: np.asarray(v["value"]) for k, v in estimates.items()},
            path)

    _emit(args, tree, tables, figure)
    return EXIT_OK


def cmd_simulate_fcr(args):
    config = FcrConfig(n=args.n, p=args.p, lam=args.lam, gamma2=args.gamma2,
                       carve_fraction=args.carve_frac, rounds=args.rounds,
                       level=args.level, draws=args.draws,
                       burn_in=args.burn_in, seed=args.seed,
                       threads=args.threads)
    report = run_fcr_experiment(config)
    tree = {
        "command": "simulate-fcr",
        "config": {"n": config.n, "p": config.p, "lambda": config.lam,
                   "gamma2": config.gamma2,
                   "carve_frac": config.carve_fraction,
                   "rounds": config.rounds, "level": config.level,
                   "draws": config.draws, "seed": config.seed,
                   "threads": config.threads},
        "coverage": report.coverage,
        "fcr": report.fcr,
        "skipped": report.skipped,
        "round_records": report.records,
    }
    rows = [(m, report.coverage[m], report.fcr[m], report.skipped[m])
            for m in FCR_METHODS]
    tables = {"summary": (("method", "coverage", "fcr", "skipped"), rows)}

    def figure(path):
        render_fcr_figure(report, path, level=config.level)

    _emit(args, tree, tables, figure)
    selective = [m for m in FCR_METHODS if m != "no-selection"]
    if all(np.isnan(report.fcr[m]) for m in selective):
        raise EmptySelectionError("every round was skipped: nothing selected")
    return EXIT_OK


def cmd_demo_univariate(args):
    mu_grid = _parse_grid(args.mu_grid)
    y_grid = _parse_grid(args.y_grid)
    table = univariate_curves(mu_grid, y_grid, gamma2=args.gamma2)
    tree = {
        "command": "demo-univariate",
        "config": {"mu_grid": args.mu_grid, "y_grid": args.y_grid,
                   "gamma2": args.gamma2, "seed": args.seed},
        "probability": {"mu": table.mu_values,
                        "exact": table.exact_log_probability,
                        "chernoff": table.chernoff_log_probability,
                        "barrier": table.barrier_log_probability},
        "estimators": {"y": table.y_values,
                       "unadjusted": table.unadjusted,
                       "exact_mle": table.exact_mle,
                       "approximate_mle": table.approximate_mle,
                       "randomized_mle": table.randomized_mle},
    }
    prob_rows = list(zip(table.mu_values, table.exact_log_probability,
                         table.chernoff_log_probability,
                         table.barrier_log_probability))
    est_rows = list(zip(table.y_values, table.unadjusted, table.exact_mle,
                        table.approximate_mle, table.randomized_mle))
    tables = {
        "probability": (("mu", "exact", "chernoff", "barrier"),
                        [tuple(float(v) for v in r) for r in prob_rows]),
        "estimators": (("y", "unadjusted", "exact_mle", "approximate_mle",
                        "randomized_mle"),
                       [tuple(float(v) for v in r) for r in est_rows]),
    }

    def figure(path):
        render_univariate_figure(table, path)

    _emit(args, tree, tables, figure)
    return EXIT_OK


def cmd_consistency(args):
    try:
        n_values = tuple(int(tok) for tok in args.n_values.split(","))
    except ValueError:
        raise ContractViolationError(
            f"--n-values must be comma-separated ints, got {args.n_values!r}")
    config = ConsistencyConfig(beta_star=args.beta_star, n_values=n_values,
                               replications=args.replications,
                               gamma2=args.gamma2, seed=args.seed)
    report = consistency_experiment(config)
    tree = {
        "command": "consistency",
        "config": {"beta_star": config.beta_star,
                   "n_values": list(config.n_values),
                   "replications": config.replications,
                   "gamma2": config.gamma2, "seed": config.seed},
        "median_errors": report.median_errors,
    }
    rows = [(n,) + tuple(report.median_errors[a][i] for a in
                         ("randomized", "nonrandomized", "unadjusted"))
            for i, n in enumerate(report.n_values)]
    tables = {"errors": (("n", "randomized", "nonrandomized", "unadjusted"),
                         rows)}

    def figure(path):
        render_consistency_figure(report, path)

    _emit(args, tree, tables, figure)
    return EXIT_OK


def _add_data_flags(p, with_posterior):
    p.add_argument("--x", required=True, help="design matrix CSV")
    p.add_argument("--y", required=True, help="response CSV")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="lasso penalty")
    p.add_argument("--gamma2", type=float, default=0.0,
                   help="randomization variance (0 disables)")
    p.add_argument("--carve-frac", dest="carve_frac", type=float, default=None,
                   help="holdout fraction for data carving")
    p.add_argument("--prior", default="flat",
                   help="flat, gaussian:<tau2> or mixture")
    if with_posterior:
        p.add_argument("--level", type=float, default=0.95)
        p.add_argument("--draws", type=int, default=20000)
        p.add_argument("--burn-in", dest="burn_in", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="selective-bayes",
        description="Bayesian inference adjusted for Lasso selection.",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="selection, posterior sampling, intervals")
    _add_data_flags(p, with_posterior=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("estimate", help="selective point estimates only")
    _add_data_flags(p, with_posterior=False)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("simulate-fcr", help="false coverage rate study")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--lambda", dest="lam", type=float, default=1.56)
    p.add_argument("--gamma2", type=float, default=0.1)
    p.add_argument("--carve-frac", dest="carve_frac", type=float, default=0.2)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--draws", type=int, default=4000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate_fcr)

    p = sub.add_parser("demo-univariate",
                       help="selection probability and estimator curves")
    p.add_argument("--mu-grid", dest="mu_grid", default="-4:4:0.1",
                   help="lo:hi:step for the mean grid")
    p.add_argument("--y-grid", dest="y_grid", default="0.2:5:0.2",
                   help="lo:hi:step for the observation grid")
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_demo_univariate)

    p = sub.add_parser("consistency", help="estimator error versus n")
    p.add_argument("--beta-star", dest="beta_star", type=float, default=-0.5)
    p.add_argument("--n-values", dest="n_values", default="100,1000,10000")
    p.add_argument("--replications", type=int, default=500)
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_consistency)
    return parser


def _configure_logging():
    name = os.environ.get("SELECTIVE_BAYES_LOG", "error")
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if name not in levels:
        raise ContractViolationError(
            f"SELECTIVE_BAYES_LOG must be error, info or debug, got {name!r}")
    logging.basicConfig(level=levels[name],
                        format="%(levelname)s %(name)s: %(message)s")


def _error_line(code, exc):
    return (f"error: category={_CATEGORY.get(code, 'internal')} "
            f"exit={code} message={json.dumps(str(exc))}\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _configure_logging()
        return args.fn(args)
    except SelectiveBayesError as e:
        sys.stderr.write(_error_line(e.exit_category, e))
        return e.exit_category
    except (OSError, UnicodeDecodeError, ValueError) as e:
        sys.stderr.write(_error_line(EXIT_INPUT, e))
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover - safety net
        sys.stderr.write(_error_line(5, e))
        return 5


if __name__ == "__main__":
    sys.exit(main())
