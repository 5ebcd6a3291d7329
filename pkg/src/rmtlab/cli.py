"""``rmtlab`` command line."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from rmtlab import __version__
from rmtlab.config import ConfigError, RunConfig, load_config
from rmtlab.parallel import default_threads, set_threads
from rmtlab.reports import write_manifest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("rmtlab")


def _numerical_errors():
    import numpy as np

    from rmtlab.limit_law import ConvergenceError
    from rmtlab.quadrature import QuadratureError
    from rmtlab.resolvent import ResolventError
    from rmtlab.stable_laws import DegenerateEstimateError

    return (ConvergenceError, QuadratureError, ResolventError, DegenerateEstimateError,
            np.linalg.LinAlgError, FloatingPointError, ArithmeticError, RuntimeError)


def execute(cfg: RunConfig, out_dir=None, threads=None, dump=False, stream=sys.stdout):
    """Run one configuration; returns the exit status."""
    from rmtlab.experiments import RUNNERS, _dump

    out = out_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    threads = threads or cfg.threads
    if threads is None:
        threads = default_threads()
    set_threads(threads)
    cfg.threads = threads
    start = time.perf_counter()
    runner = RUNNERS[cfg.experiment]
    try:
        files, checks = runner(cfg, out)
        if dump and cfg.ensemble is not None:
            _dump(cfg, out, files)
    except _numerical_errors() as exc:
        print(f"numerical error in {cfg.experiment} ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.perf_counter() - start
    ok = all(c.passed for c in checks) if cfg.checks else True
    for c in checks:
        print(c.line(), file=stream)
    status = "pass" if ok else "fail"
    write_manifest(os.path.join(out, "manifest.json"), cfg.raw, cfg.text, cfg.seed,
                   {k: os.path.relpath(v, out) for k, v in files.items()}, wall, checks, __version__, status)
    print(f"{cfg.experiment}: {status} ({wall:.1f} s) -> {out}", file=stream)
    return EXIT_OK if ok else EXIT_FAIL


def _threads_arg(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be positive")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="rmtlab", description="Heavy-tailed random matrix experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=_threads_arg)
    r.add_argument("--out")
    r.add_argument("--dump", action="store_true", help="write binary matrix dumps of trial 0")
    v = sub.add_parser("validate", help="validate a config without running it")
    v.add_argument("config")
    s = sub.add_parser("selftest", help="run the closed-form identity checks")
    s.add_argument("--out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            cfg = RunConfig({"schema": "rmtlab/1", "experiment": "selftest"})
            if args.out is None:
                from rmtlab.experiments import selftest_checks

                checks = selftest_checks()
                for c in checks:
                    print(c.line())
                ok = all(c.passed for c in checks)
                print(f"selftest: {'pass' if ok else 'fail'}")
                return EXIT_OK if ok else EXIT_FAIL
            return execute(cfg, args.out)
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: valid ({cfg.experiment})")
            return EXIT_OK
        return execute(cfg, args.out, args.threads, args.dump)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # bad RMT_THREADS and similar environment problems
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
