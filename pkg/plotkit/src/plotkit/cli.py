"""Command-line entry point: render one figure from CSV input(s)."""

from __future__ import annotations

import argparse
import sys

from .render import FigureKind, PlotSpec, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render an hfcavity CSV into a figure (PNG/PDF/SVG by extension).",
    )
    parser.add_argument("--kind", required=True, choices=[k.value for k in FigureKind])
    parser.add_argument(
        "--input", action="append", required=True,
        help="input CSV; repeat to overlay extra transmission curves on a slice",
    )
    parser.add_argument("--output", required=True, help="output image path")
    parser.add_argument("--x-min", type=float)
    parser.add_argument("--x-max", type=float)
    parser.add_argument("--y-min", type=float)
    parser.add_argument("--y-max", type=float)
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)

    def axis_range(lo, hi):
        if (lo is None) != (hi is None):
            parser.error("axis bounds must be given in min/max pairs")
        return None if lo is None else (lo, hi)

    try:
        spec = PlotSpec(
            inputs=tuple(args.input),
            kind=FigureKind(args.kind),
            output=args.output,
            x_range=axis_range(args.x_min, args.x_max),
            y_range=axis_range(args.y_min, args.y_max),
            title=args.title,
        )
        render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
