"""Command-line entry point: ``topocrit run | validate | list-experiments``."""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import TopocritError
from .experiments import EXPERIMENTS, ConfigError, load_config, run_experiment
from .parallel import default_workers

EXIT_OK, EXIT_ERROR, EXIT_FIT = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="topocrit", description="Criticality-enhanced metrology experiments.")
    p.add_argument("--version", action="version", version=f"topocrit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config and write CSV + JSON outputs")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: config 'workers', then $TOPOCRIT_WORKERS, then 1)")
    r.add_argument("--out", default=None, help="output directory (default: config 'out', then '.')")
    r.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="list the experiment kinds")
    return p


def _workers(arg, cfg):
    w = arg if arg is not None else cfg.workers
    if w is None:
        w = default_workers()
    if w < 1:
        raise ValueError(f"worker count must be >= 1, got {w}")
    return w


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        width = max(map(len, EXPERIMENTS))
        for name, desc in EXPERIMENTS.items():
            print(f"{name:<{width}}  {desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except OSError as e:
        print(f"error: cannot read {args.config}: {e.strerror or e}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigError as e:
        print(f"error: {args.config}: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "validate":
        print(f"{args.config}: valid {cfg.experiment} config")
        return EXIT_OK
    try:
        workers = _workers(args.workers, cfg)
        result, paths = run_experiment(cfg, args.out, workers, plot=False if args.no_plot else None)
    except (TopocritError, ValueError, ArithmeticError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    for kind, path in paths.items():
        print(f"wrote {path}")
    for f in result.fits:
        status = "PASS" if f.passed else "FAIL"
        print(f"{status} {f.label}: exponent {f.fit.exponent:.4f} "
              f"(reference {f.reference:g} +/- {f.tolerance:g}, R^2 {f.fit.r_squared:.5f})")
    return EXIT_OK if result.passed else EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
