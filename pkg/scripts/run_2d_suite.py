#!/usr/bin/env python3
"""Run the four ancestral-predictor 2D experiments (spiral, funnel,
sierpinski, pinwheel), once with the unadjusted corrector and once with the
hybrid-adjusted corrector, then emit plot CSVs per dataset.

    python3 scripts/run_2d_suite.py --out runs/2d [--fast]
"""

import argparse
import sys
from pathlib import Path

from madm.cli import main as madm_main

PRESETS = ("spiral", "funnel", "sierpinski", "pinwheel")
FAST = ["--set", "run.chains=1000", "--set", "target.n_points=1000"]


def run(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/2d")
    parser.add_argument("--fast", action="store_true")
    args = parser.parse_args(argv)
    out = Path(args.out)

    for preset in PRESETS:
        for label, corrector in (("ula", "ula"), ("madm", "hybrid")):
            cmd = ["sample", "--preset", preset, "--quiet",
                   "--corrector", corrector,
                   "--out", str(out / preset / label)]
            if args.fast:
                cmd += FAST
            print(f"[{preset}/{label}]")
            code = madm_main(cmd)
            if code != 0:
                return code
        code = madm_main(["plotdata", str(out / preset),
                          "--out", str(out / preset / "plots")])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
