#!/usr/bin/env python3
"""Run every verification suite and report a one-line verdict for each.

    python3 scripts/run_verify_all.py --out runs/verify
"""

import argparse
import sys

from madm.cli import main as madm_main
from madm.verify import SUITES


def run(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/verify")
    args = parser.parse_args(argv)
    worst = 0
    for suite in sorted(SUITES):
        code = madm_main(["verify", suite, "--out", args.out])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run())
