"""``optdesign`` command line.

Exit codes: 0 success, 1 solver error, 2 configuration error, 3 failed verification.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import bench, verify
from .exceptions import ConfigError, OptDesignError, ParseError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed_list(text: str):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optdesign", description="Optimal experimental design on a finite design space.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve one configuration and emit result rows")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--space", choices=["chi1", "chi2", "chi3", "chi4"], default="chi1")
    src.add_argument("--problem", metavar="FILE", help="JSON problem file")
    run.add_argument("--n", type=int, default=10000, help="grid size (chi3 uses n*n points)")
    run.add_argument("--criterion", choices=["A", "c", "D", "pmean"], default="A")
    run.add_argument("--p", type=float, help="order of the p-th mean criterion (p < 0)")
    run.add_argument("--K", dest="k_mode", choices=["identity", "random", "file"], default=None,
                     help="default: 'file' with --problem, else 'identity'")
    run.add_argument("--k", type=int, help="columns of a random K")
    run.add_argument("--seed", type=_seed_list, default=(0,), help="seed or comma-separated seed list")
    run.add_argument("--aggregate", action="store_true", help="append the mean over seeds")
    run.add_argument("--solver", choices=["ip", "mult", "both"], default="ip")
    run.add_argument("--format", choices=list(bench.FORMATS), default="csv")
    run.add_argument("--out", help="output path (default: stdout)")
    run.add_argument("--mu1", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--max-iters", type=int)

    ver = sub.add_parser("verify", help="run a self-check suite")
    ver.add_argument("--suite", choices=sorted(verify.SUITES) + ["all"], default="all")
    return parser


def _run_config(args) -> bench.RunConfig:
    ip = {k: v for k, v in (("mu1", args.mu1), ("gamma", args.gamma)) if v is not None}
    mult = {k: v for k, v in (("lam", args.lam), ("delta", args.delta), ("max_iters", args.max_iters))
            if v is not None}
    k_mode = args.k_mode or ("file" if args.problem else "identity")
    return bench.RunConfig(
        space=None if args.problem else args.space,
        n=args.n,
        criterion=args.criterion,
        p=args.p,
        k_mode=k_mode,
        k=args.k,
        seeds=args.seed,
        aggregate=args.aggregate,
        solvers=("ip", "mult") if args.solver == "both" else (args.solver,),
        ip_overrides=ip,
        mult_overrides=mult,
        problem_path=args.problem,
        output_path=args.out,
        output_format=args.format,
    )


def _cmd_run(args) -> int:
    config = _run_config(args)
    rows = bench.run(config)
    text = bench.emit(rows, config.output_format, config.output_path)
    if config.output_path is None:
        sys.stdout.write(text)
    for r in rows:
        if r.error:
            print(f"error: {r.solver} on {r.space}: {r.error}", file=sys.stderr)
    return EXIT_SOLVER if any(r.error for r in rows) else EXIT_OK


def _cmd_verify(args) -> int:
    checks = verify.run_suite(args.suite)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_verify(args)
    except (ConfigError, ParseError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptDesignError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
