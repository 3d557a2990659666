"""Command line: plotviz plot --kind KIND --in results.csv --out fig.png"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, NoDataError, SchemaError, plot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotviz", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot", help="render one figure kind from a results CSV")
    p.add_argument("--kind", required=True, choices=sorted(FIGURE_KINDS))
    p.add_argument("--in", dest="csv_path", required=True, help="input results CSV")
    p.add_argument("--out", dest="out_path", required=True, help="output image file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = plot(args.csv_path, args.kind, args.out_path)
    except (SchemaError, NoDataError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
