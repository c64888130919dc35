"""Command line front end: ``commutefigs render <out_dir> [--format png|svg]``."""

from __future__ import annotations

import argparse
import sys

from .io import DataFormatError
from .render import render_figures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="commutefigs",
        description="Render commutesim scenario CSV output into figures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render all figure kinds from a scenario directory")
    render.add_argument("out_dir", help="scenario output directory holding the CSV files")
    render.add_argument("--format", choices=("png", "svg"), default="png")
    args = parser.parse_args(argv)

    try:
        written = render_figures(args.out_dir, fmt=args.format)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    for path in written:
        print(path)
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
