"""Command line entry point: ``rapid-plots plot <config.json> --out dir``."""

from __future__ import annotations

import argparse
import sys

from .curves import MissingColumnError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rapid-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    p_plot = sub.add_parser("plot", help="render learning-curve panels from CSV logs")
    p_plot.add_argument("config", help="plot config JSON")
    p_plot.add_argument("--out", required=True, help="output directory for images")
    args = parser.parse_args(argv)

    try:
        results = render(args.config, args.out)
    except (MissingColumnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for title, (path, _) in results.items():
        print(f"{title}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
