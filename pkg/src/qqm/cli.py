"""Command line entry point: ``qqm run scenario.ini [...]``.

Exit status: 0 all thresholds met, 1 a threshold failed, 2 the scenario
could not be parsed, 3 a physical constraint was violated. With several
files the largest status wins.
"""

from __future__ import annotations

import argparse
import sys

from .scenario import EXIT_PARSE, run_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qqm", description="Quaternionic quantum mechanics scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one or more scenario files")
    run.add_argument("scenarios", nargs="+", help="INI scenario files")
    run.add_argument("--grid-refine", type=int, default=1, metavar="N", help="number of grid levels, each halving the spacing")
    run.add_argument("--tolerance", type=float, default=None, metavar="X", help="override every upper-bound threshold")
    run.add_argument("--out-dir", default=None, help="write outputs here instead of the scenario's output prefix directory")
    run.add_argument("--quiet", action="store_true", help="suppress per-row output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else 0
    if args.grid_refine < 1:
        print("--grid-refine must be at least 1", file=sys.stderr)
        return EXIT_PARSE
    if args.tolerance is not None and not args.tolerance > 0:
        print("--tolerance must be positive", file=sys.stderr)
        return EXIT_PARSE
    worst = 0
    for path in args.scenarios:
        code, result, message = run_scenario(path, args.grid_refine, args.tolerance, args.out_dir)
        worst = max(worst, code)
        if result is None:
            print(message, file=sys.stderr)
            continue
        if not args.quiet:
            for row in result.rows:
                print(f"  {row.status:>17}  {row.tag:<5} {row.quantity:<55} {row.value: .6e}")
        print(message)
    return worst


if __name__ == "__main__":
    sys.exit(main())
