"""Command-line interface: ``run``, ``convergence`` and ``properties``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 property-suite failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from ..pressure import PressureSolveError
from ..schemes1d import CFLViolation
from ..schemes2d import SubcharacteristicViolation
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import HartenCoefficients, harten_coefficients
from .output import OUTPUT_ENV
from .properties import SUITES, run_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PROPERTY = 4

NUMERICAL_ERRORS = (CFLViolation, SubcharacteristicViolation, PressureSolveError,
                    FloatingPointError)

__all__ = ["main", "ConfigError", "RunConfig", "load_config", "parse_config",
           "HartenCoefficients", "harten_coefficients", "EXIT_OK", "EXIT_CONFIG",
           "EXIT_NUMERICAL", "EXIT_PROPERTY"]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relaxflow",
        description="Relaxed finite-volume schemes for hyperbolic conservation laws.",
        epilog=f"Set {OUTPUT_ENV} to override the configured output directory.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="evolve one configured problem and write CSV/JSON output")
    r.add_argument("--config", required=True, help="JSON run configuration")
    c = sub.add_parser("convergence", help="error/order table over the configured grids")
    c.add_argument("--config", required=True, help="JSON run configuration with 'grids'")
    q = sub.add_parser("properties", help="run a seeded invariant suite")
    q.add_argument("--suite", required=True, choices=SUITES)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--trials", type=int, default=None)
    return p


def _cmd_run(args) -> int:
    from .runners import run
    cfg = load_config(args.config)
    paths = run(cfg)
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    return EXIT_OK


def _cmd_convergence(args) -> int:
    from .runners import convergence
    cfg = load_config(args.config)
    result = convergence(cfg)
    print(f"{'scheme':>6} {'N':>9} {'l1':>12} {'order':>7} {'linf':>12} {'order':>7}")
    def order(o):
        return f"{'-':>7}" if o != o else f"{o:7.3f}"
    for scheme, n, l1, o1, linf, oinf in result["rows"]:
        print(f"{scheme:>6} {str(n):>9} {l1:12.4e} {order(o1)} {linf:12.4e} {order(oinf)}")
    print(f"convergence: {result['convergence']}")
    return EXIT_OK


def _cmd_properties(args) -> int:
    if args.trials is not None and args.trials <= 0:
        raise ConfigError("--trials", "must be positive")
    report = run_suite(args.suite, args.seed, args.trials)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_PROPERTY


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "convergence": _cmd_convergence, "properties": _cmd_properties}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
