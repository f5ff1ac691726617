"""Command-line front end: ``dephasing {run, compare, figure, steady}``.

Exit codes: 0 success, 1 usage error, 2 comparison failure, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from . import runner
from .errors import DomainError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_COMPARE, EXIT_NUMERICAL = 0, 1, 2, 3

# flag destination -> RunConfig field
_CASE_FLAGS = {
    "noise": "noise",
    "gamma": "gamma",
    "sigma": "sigma",
    "b": "b",
    "chi": "chi",
    "lam": "lam",
    "nu": "nu",
    "a": "a",
    "c": "c",
    "k": "k",
    "t_max": "t_max",
    "dt": "dt",
    "n_traj": "n_traj",
    "seed": "seed",
    "ou_substeps": "ou_substeps",
    "n_x": "n_x",
    "x_half_width": "x_half_width",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_case_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="file of 'key = value' lines; flags override it")
    p.add_argument("--noise", choices=("oun", "rtn"))
    g = p.add_argument_group("OU noise")
    g.add_argument("--gamma", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--chi", type=float)
    g = p.add_argument_group("telegraph noise")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--nu", type=float)
    g.add_argument("--a", type=float)
    g = p.add_argument_group("coupling and grid")
    g.add_argument("--c", type=float)
    g.add_argument("--k", type=int, choices=(1, 2))
    g.add_argument("--t-max", dest="t_max", type=float)
    g.add_argument("--dt", type=float)
    g = p.add_argument_group("Monte Carlo and PDE")
    g.add_argument("--n-traj", dest="n_traj", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--ou-substeps", dest="ou_substeps", type=int)
    g.add_argument("--n-x", dest="n_x", type=int)
    g.add_argument("--x-half-width", dest="x_half_width", type=float)
    p.add_argument("--threads", type=int, help="worker threads for Monte Carlo (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dephasing", description="Qubit dephasing under nonstationary noise.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one solver and write a CSV trace")
    _add_case_flags(p)
    p.add_argument("--solver", choices=runner.SOLVERS)
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("compare", help="run several solvers on one case and compare F")
    _add_case_flags(p)
    p.add_argument(
        "--solvers", help="comma-separated solvers (default: all)", default=None
    )
    p.add_argument("--out", help="JSON report path (default: stdout)")

    p = sub.add_parser("figure", help="write plot-ready CSVs for a figure preset")
    p.add_argument("preset", nargs="?", help="one of: " + ", ".join(runner.FIGURE_PRESETS))
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("steady", help="print long-time rate and shift as JSON")
    _add_case_flags(p)
    p.add_argument("--out", help="JSON path (default: stdout)")
    return parser


def _settings(args) -> dict:
    values = runner.read_config(args.config) if args.config else {}
    for dest, name in _CASE_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    if getattr(args, "solver", None):
        values["solver"] = args.solver
    if getattr(args, "solvers", None):
        values["solvers"] = args.solvers
    if getattr(args, "threads", None) is not None:
        values["threads"] = args.threads
    return values


def _threads(values: dict) -> int:
    t = values.pop("threads", None)
    if t is None:
        return os.cpu_count() or 1
    t = int(t)
    if t < 1:
        raise DomainError("--threads must be >= 1")
    return t


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _cmd_run(args, values) -> int:
    threads = _threads(values)
    values.pop("solvers", None)
    cfg = runner.RunConfig(**values)
    trace = runner.run_solver(cfg, threads=threads)
    text = runner.format_csv(trace, cfg)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_compare(args, values) -> int:
    threads = _threads(values)
    solvers = values.pop("solvers", None)
    names = [s.strip() for s in solvers.split(",")] if solvers else list(runner.SOLVERS)
    unknown = [s for s in names if s not in runner.SOLVERS]
    if unknown:
        raise DomainError(f"unknown solver(s): {', '.join(unknown)}")
    values.pop("solver", None)
    base = runner.RunConfig(**values)
    report = runner.compare_solvers(base, names, threads=threads)
    _emit(runner.dumps(report), args.out)
    return EXIT_OK if report["pass"] else EXIT_COMPARE


def _cmd_figure(args) -> int:
    if args.preset not in runner.FIGURE_PRESETS:
        sys.stderr.write(
            f"unknown preset {args.preset!r}; valid presets: {', '.join(runner.FIGURE_PRESETS)}\n"
        )
        return EXIT_USAGE
    for path in runner.figure(args.preset, args.out):
        sys.stdout.write(path + "\n")
    return EXIT_OK


def _cmd_steady(args, values) -> int:
    for key in ("threads", "solvers", "solver"):
        values.pop(key, None)
    cfg = runner.RunConfig(**values)
    _emit(runner.dumps(runner.steady(cfg)), args.out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            return _cmd_figure(args)
        values = _settings(args)
        if args.command == "run":
            return _cmd_run(args, values)
        if args.command == "compare":
            return _cmd_compare(args, values)
        return _cmd_steady(args, values)
    except (DomainError, TypeError) as exc:
        sys.stderr.write(f"dephasing: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"dephasing: cannot write output: {exc}\n")
        return EXIT_USAGE
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(f"dephasing: numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
