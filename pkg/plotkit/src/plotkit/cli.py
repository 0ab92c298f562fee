"""Command line: plotkit <kind> --in <csv> [--in <csv> ...] --out <img>.

Exit codes: 0 on success (including empty inputs, which draw empty axes with
a warning), 2 on unusable input such as missing columns.
"""

from __future__ import annotations

import argparse
import sys

from .io import PlotError
from .render import KINDS, PlotJob, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render simulator sweep CSVs to figures (file output only)")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable for pn_bars)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        job = PlotJob(kind=args.kind, inputs=tuple(args.inputs), out=args.out,
                      title=args.title, dpi=args.dpi)
        result = render(job)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({result.width_px}x{result.height_px}px)",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
