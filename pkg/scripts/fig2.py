#!/usr/bin/env python3
"""Jumptime transport statistics for SSH under collective and local collapse.

Writes transport, histogram and skewness CSVs (plot-ready) plus a manifest.
Usage: python3 scripts/fig2.py [--output DIR] [--trajectories N]
"""

import argparse
import sys
from pathlib import Path

from jumptime.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "fig2.json"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="runs/fig2")
    ap.add_argument("--trajectories", type=int, default=700)
    args = ap.parse_args()
    sys.exit(main(["fig2", "--config", str(CONFIG), "--output", args.output,
                   "--trajectories", str(args.trajectories)]))
