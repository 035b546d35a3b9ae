"""Write a synthetic dataset plus the six scenario configs into one directory."""

import argparse
import sys

from gridplan.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="demo")
    p.add_argument("--preset", choices=("basin", "desk"), default="desk")
    p.add_argument("--rep-days", type=int, default=4)
    p.add_argument("--seed", type=int, default=7)
    a = p.parse_args()
    sys.exit(main(["synth", "--out", a.out, "--preset", a.preset, "--rep-days", str(a.rep_days),
                   "--seed", str(a.seed)]))
