"""Command-line front end.

Exit codes: 0 success, 1 numerical failure (divergence, rate-bound
violation, boundary-mass overflow), 2 bad input (config or arguments).
Set CHARLIER_LOG=debug for verbose progress output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, harness
from .harness import ConfigError, ExperimentConfig
from .models import GrowthError
from .solve import (IntegrationError, RateBoundError, SolverError,
                    solve_closure, solve_reference)

log = logging.getLogger("charlierbd")

_NUMERICAL = (SolverError, IntegrationError, RateBoundError, GrowthError,
              FloatingPointError)


def _setup_logging():
    level = os.environ.get("CHARLIER_LOG", "info").lower()
    logging.basicConfig(
        level={"debug": logging.DEBUG, "info": logging.INFO,
               "warning": logging.WARNING}.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s")


def _load_config(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_file(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}")


def _write_traj_csv(traj, path, cols=("mean", "variance", "cum3", "cum4")):
    with open(path, "w") as fh:
        fh.write("t," + ",".join(cols) + "\n")
        series = [getattr(traj, c) for c in cols]
        for i, t in enumerate(traj.times):
            fh.write("%.6e," % t)
            fh.write(",".join("%.6e" % s[i] for s in series) + "\n")


def cmd_solve_reference(args):
    cfg = _load_config(args.config)
    traj = harness.run_reference(cfg)
    _write_traj_csv(traj, args.output)
    log.info("reference run written to %s (mass residual %.3e)",
             args.output, traj.meta["mass_residual"])
    return 0


def cmd_solve_galerkin(args):
    cfg = _load_config(args.config)
    traj = harness.run_galerkin(cfg, args.order)
    _write_traj_csv(traj, args.output)
    log.info("order-%d spectral run written to %s (basis a=%.6g)",
             args.order, args.output, traj.meta["a"])
    return 0


def cmd_solve_closure(args):
    cfg = _load_config(args.config)
    traj = solve_closure(cfg.kind, cfg.closure_params(), args.order,
                         cfg.initial_state(), cfg.grid())
    cols = ["mean", "variance"]
    _write_traj_csv(traj, args.output, cols=cols)
    log.info("%s-order closure run written to %s", args.order, args.output)
    return 0


def cmd_simulate(args):
    cfg = _load_config(args.config)
    if args.paths is not None:
        cfg.n_paths = args.paths
    traj = harness.run_simulation(cfg, dt_out=args.dt_out)
    with open(args.output, "w") as fh:
        fh.write("t,mean,variance,se_mean\n")
        for i, t in enumerate(traj.times):
            fh.write("%.6e,%.6e,%.6e,%.6e\n" % (
                t, traj.mean[i], traj.variance[i], traj.se_mean[i]))
    log.info("%d simulated paths written to %s", cfg.n_paths, args.output)
    return 0


def cmd_table(args):
    cfg = _load_config(args.config)
    table = harness.run_table(cfg)
    harness.write_table_csv(table, args.output)
    log.info("error table written to %s", args.output)
    return 0


def cmd_figures(args):
    cfg = _load_config(args.config)
    series = harness.run_figures(cfg)
    harness.write_series_csv(series, args.output)
    log.info("figure series written to %s", args.output)
    return 0


def _oracle_suites():
    """Quick numeric self-checks: orthonormality, isometry, Chen-Stein,
    and a sample of the closure closed forms against brute-force sums.
    Yields (name, passed) pairs."""
    from .basis import CharlierBasis
    from .closure import (SurrogateParams, expected_indicator_below,
                          expected_min, expected_overflow, surrogate_pmf)
    from .sobolev import isometry_residual
    from .special import chen_stein_gap, poisson_pmf

    worst = 0.0
    for a, xm in ((1.0, 60), (5.0, 90), (100.0, 400)):
        basis = CharlierBasis(a=a, N=10, X_max=xm)
        G = (basis.table * basis.weights) @ basis.table.T
        worst = max(worst, float(np.max(np.abs(G - np.eye(11)))))
    yield "orthonormality", worst < 1e-10

    res = max(isometry_residual(poisson_pmf(2.0, 60), 3.0, m)
              for m in range(5))
    yield "isometry", res < 1e-10

    gap = max(abs(chen_stein_gap(f, q))
              for q in (1.0, 5.0, 20.0)
              for f in (lambda x: 1.0, lambda x: float(x),
                        lambda x: float(x) ** 2, lambda x: float(x) ** 3))
    yield "chen-stein", gap < 1e-10

    err = 0.0
    for q in (0.8, 5.0, 30.0):
        for a1 in (0.0, 0.3):
            s = SurrogateParams(q=q, a1=a1,
                                order="zeroth" if a1 == 0.0 else "first")
            p = surrogate_pmf(s, 600)
            xs = np.arange(601)
            for c in (0, 2, 9):
                err = max(err,
                          abs(expected_overflow(s, c)
                              - float(np.maximum(xs - c, 0) @ p)),
                          abs(expected_min(s, c)
                              - float(np.minimum(xs, c) @ p)),
                          abs(expected_indicator_below(s, c)
                              - float((xs < c) @ p)))
    yield "closure closed forms", err < 1e-9


def cmd_validate(args):
    if args.config is not None:
        cfg = _load_config(args.config)
        print(json.dumps({"config_ok": True, "hash": cfg.hash(),
                          "kind": cfg.kind, "X_max": cfg.x_max()}))
    failures = 0
    for name, ok in _oracle_suites():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="charlierbd",
        description="Birth-death moment dynamics via Charlier expansions")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="experiment config (JSON)")
        sp.add_argument("-o", "--output", default=f"{name}.csv",
                        help="output CSV path")
        sp.set_defaults(fn=fn)
        return sp

    add("solve-reference", cmd_solve_reference,
        "truncated master-equation reference run")
    sg = add("solve-galerkin", cmd_solve_galerkin,
             "spectral coefficient run at one expansion order")
    sg.add_argument("-N", "--order", type=int, required=True)
    sc = add("solve-closure", cmd_solve_closure, "moment-closure run")
    sc.add_argument("--order", choices=("zeroth", "first"), default="first")
    sim = add("simulate", cmd_simulate, "thinning path simulation")
    sim.add_argument("--paths", type=int, default=None)
    sim.add_argument("--dt-out", type=float, default=0.01)
    add("table", cmd_table, "error table over expansion orders")
    add("figures", cmd_figures, "closure-vs-reference figure series")
    v = sub.add_parser("validate",
                       help="run the numeric oracle suites; optionally "
                            "schema-check a config first")
    v.add_argument("config", nargs="?", default=None)
    v.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except _NUMERICAL as exc:
        log.error("numerical failure: %s", exc)
        return 1
    except ValueError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
