"""Command-line entry point.

Precedence for every setting: command-line override, then scenario file,
then built-in default.

Exit status: 0 all checks pass, 1 a check fails (or a gap exceeds --tol),
2 solver error, 64 usage error, 66 missing or unreadable scenario file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import SolverError, ThermostringError
from .harness import compare_backends, refinement_sweep, run_scenario, stability_pair
from .scenario import Scenario, parse_scenario_with_warnings

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _dt(text: str) -> float | str:
    if text == "auto":
        return text
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"dt must be positive or 'auto', got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="thermostring",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("scenario", help="scenario file (YAML or JSON)")
    common.add_argument("--mu", type=float, help="coupling constant")
    common.add_argument("--nx", type=_positive_int, help="number of grid cells")
    common.add_argument("--dt", type=_dt, help="time step or 'auto' (0.9*dx)")
    common.add_argument("--t-end", type=float, help="final time")
    common.add_argument("--scheme", choices=["fd", "galerkin"], help="solver backend")
    common.add_argument("--modes", type=_positive_int, help="number of Galerkin modes")
    common.add_argument("--sample-every", type=_positive_int, help="steps between diagnostics rows")
    common.add_argument("--out", help="output directory")
    common.add_argument("--strict", action="store_true", help="reject unknown scenario keys instead of warning")
    common.add_argument("--quiet", action="store_true", help="print only the final verdict line")

    sub.add_parser("run", parents=[common], help="run a scenario, write CSV + report")
    sub.add_parser("verify", parents=[common], help="run a scenario and print verdicts only")
    p = sub.add_parser("sweep", parents=[common], help="refinement sweep with observed orders")
    p.add_argument("--levels", type=int, default=3)
    p = sub.add_parser("compare", parents=[common], help="FD vs Galerkin gaps at the final time")
    p.add_argument("--tol", type=float, default=1e-2)
    p = sub.add_parser("stability", parents=[common], help="paired runs with perturbed initial data")
    p.add_argument("--delta0", type=float, default=1e-3, help="initial distance of the perturbed run")
    return parser


def _load(args) -> Scenario:
    path = Path(args.scenario)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read scenario {path}: {exc.strerror}") from exc
    scenario, warnings = parse_scenario_with_warnings(text, str(path), strict=args.strict)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return scenario.with_overrides(
        mu=args.mu,
        n=args.nx,
        dt=args.dt,
        t_end=args.t_end,
        scheme=args.scheme,
        modes=args.modes,
        sample_every=args.sample_every,
        output=args.out,
    )


def _emit(lines, final: str, quiet: bool) -> None:
    if not quiet:
        for line in lines:
            print(line)
    print(final)


def _cmd_run(args, write: bool) -> int:
    scenario = _load(args)
    _, report = run_scenario(scenario, write=write)
    lines = report.summary_lines()
    if not args.quiet:
        lines.append(f"steps={report.steps} dt={report.dt:.6g} wall_time={report.wall_time:.2f}s hash={report.config_hash}")
        if write:
            lines.append(f"output: {scenario.output or 'output'}")
    verdict = "PASS" if report.passed else "FAIL"
    _emit(lines, f"{verdict} {len(report.checks)} checks", args.quiet)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_sweep(args) -> int:
    scenario = _load(args)
    table = refinement_sweep(scenario, args.levels)
    out = Path(scenario.output or "output")
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text("\n".join(table.lines()) + "\n")
    _emit(table.lines(), f"DONE sweep {len(table.ns)} levels (reference: {table.reference})", args.quiet)
    return EXIT_OK


def _cmd_compare(args) -> int:
    gaps = compare_backends(_load(args))
    ok = all(g <= args.tol for g in gaps.values())
    lines = [f"gap_{k}={v:.6g}" for k, v in gaps.items()]
    _emit(lines, f"{'PASS' if ok else 'FAIL'} max gap {max(gaps.values()):.6g} tol {args.tol:g}", args.quiet)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_stability(args) -> int:
    report = stability_pair(_load(args), delta0=args.delta0)
    _emit(report.lines(), f"DONE stability constant {report.max_ratio:.6g}", args.quiet)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args, write=True)
        if args.command == "verify":
            return _cmd_run(args, write=False)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_stability(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ThermostringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
