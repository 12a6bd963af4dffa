#!/usr/bin/env python3
"""Steady-state current versus the quantized jumptime displacement across v = w.

Writes crossover.csv (v_over_w, gamma, J_ss, a_times_T) and reports the
10-90% width of the current drop for each gamma.
Usage: python3 scripts/crossover.py [--output DIR]
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from jumptime.cli import main
from jumptime.steady import crossover_width

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "crossover.json"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="runs/crossover")
    args = ap.parse_args()
    code = main(["steady-state", "--config", str(CONFIG), "--output", args.output])
    if code == 0:
        by_gamma = defaultdict(list)
        with open(Path(args.output) / "crossover.csv") as fh:
            for row in csv.DictReader(fh):
                by_gamma[float(row["gamma"])].append((float(row["v_over_w"]), float(row["J_ss"])))
        for g, pts in sorted(by_gamma.items()):
            r, j = zip(*pts)
            try:
                print(f"gamma = {g:g}: 10-90% width in v/w = {crossover_width(r, j, g / 2):.4f}")
            except ValueError as exc:
                print(f"gamma = {g:g}: {exc}")
    sys.exit(code)
