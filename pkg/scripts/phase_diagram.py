#!/usr/bin/env python3
"""Jumptime phase diagrams: SSH with a sin(p) mass term, and the 2D torus model.

Each sweep writes phase_diagram.csv (param, axis, W, T, R1, R2, defect); dark
contacts appear as NaN rows.
Usage: python3 scripts/phase_diagram.py [--output DIR]
"""

import argparse
import sys
from pathlib import Path

from jumptime.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="runs/phase_diagram")
    args = ap.parse_args()
    code = 0
    for name in ("ssh_sweep", "torus_sweep"):
        code = max(code, main(["topology", "--config", str(CONFIGS / f"{name}.json"),
                               "--output", f"{args.output}/{name}"]))
    sys.exit(code)
