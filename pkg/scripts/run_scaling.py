#!/usr/bin/env python3
"""Optimal-scaling study: the limiting efficiency curve and the measured
finite-dimensional acceptance at the optimal step size.

    python3 scripts/run_scaling.py --out runs/scaling
"""

import argparse
import sys

from madm.cli import main as madm_main


def run(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/scaling")
    parser.add_argument("--proposals", type=int, default=100_000)
    args = parser.parse_args(argv)
    return madm_main(["scaling", "--preset", "scaling",
                      "--proposals", str(args.proposals),
                      "--out", args.out])


if __name__ == "__main__":
    sys.exit(run())
