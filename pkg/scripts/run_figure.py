#!/usr/bin/env python3
"""Produce the data behind one figure preset at full caption resolution.

Examples:
    python scripts/run_figure.py fig1 --out data/fig1.csv
    python scripts/run_figure.py fig3 --out data/fig3.csv --workers 8
    python scripts/run_figure.py fig5 --out data/fig5.csv --workers 8

fig2 and fig5 at full resolution are multi-hour runs; they checkpoint to
<out>.ckpt and can be interrupted and re-run.  Use the hfcavity CLI directly
for windowed or customized grids.
"""

import argparse
import sys

from hfcavity.cli import main as cli_main
from hfcavity.sweep import preset, preset_names
from hfcavity.spectra import EigenSweepConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("figure", choices=preset_names())
    parser.add_argument("--out", required=True)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    config = preset(args.figure)
    if isinstance(config, EigenSweepConfig):
        argv = ["eigen", "--preset", args.figure, "--out", args.out]
    else:
        sub = "slice" if config.cavity_grid.count == 1 else "spectrum"
        argv = [sub, "--preset", args.figure, "--out", args.out,
                "--workers", str(args.workers)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
