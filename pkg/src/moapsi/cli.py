"""Command line entry point: ``moapsi solve | reduce | demo``.

Exit codes: 0 success (converged), 1 error, 2 solve finished without converging.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import example
from .cg import SolveOptions, cg_solve
from .errors import MoAError
from .expr import parse_expr, parse_shape
from .io import format_report, load_matrix, load_vector
from .onf import emit_pseudocode
from .reduce import reduce_to_onf

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    a = load_matrix(args.matrix)
    b = load_vector(args.rhs)
    guess = load_vector(args.guess) if args.guess else None
    options = SolveOptions(
        tolerance=args.tol,
        max_iterations=args.max_iter,
        initial_guess=guess,
    )
    report = cg_solve(a, b, options)
    _emit(format_report(report, args.format), args.out)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _parse_decl(text: str):
    name, sep, dims = text.partition("=")
    if not sep or not name.strip():
        raise MoAError(f"declaration {text!r} is not of the form name=dims")
    return name.strip(), parse_shape(dims)


def cmd_reduce(args) -> int:
    shapes = dict(_parse_decl(d) for d in args.decl)
    program = reduce_to_onf(parse_expr(args.expr, shapes))
    _emit(emit_pseudocode(program), args.out)
    return EXIT_OK


def cmd_demo(args) -> int:
    checks = example.check_example()
    for check in checks:
        print(check.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moapsi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="solve A x = b by conjugate gradient")
    solve.add_argument("--matrix", required=True, help="MatrixMarket or CSV matrix")
    solve.add_argument("--rhs", required=True, help="right-hand side vector file")
    solve.add_argument("--guess", help="initial guess vector file")
    solve.add_argument("--tol", type=float, default=1e-10, help="relative residual tolerance")
    solve.add_argument("--max-iter", type=int, default=None, help="iteration cap (default 2n)")
    solve.add_argument("--out", help="write the report here instead of stdout")
    solve.add_argument("--format", choices=("json", "csv"), default="json")
    solve.set_defaults(func=cmd_solve)

    red = sub.add_parser("reduce", help="print the loop form of an array expression")
    red.add_argument("--expr", required=True, help="expression text")
    red.add_argument(
        "--decl",
        action="append",
        default=[],
        metavar="NAME=DIMS",
        help="declare an array shape, e.g. R=2,n (repeatable)",
    )
    red.add_argument("--out", help="write the pseudocode here instead of stdout")
    red.set_defaults(func=cmd_reduce)

    demo = sub.add_parser("demo", help="replay the worked 2x2 example")
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        return args.func(args)
    except (MoAError, OSError, ValueError) as exc:
        print(f"moapsi {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
