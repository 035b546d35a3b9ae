"""Run every scenario config in a directory and print the emission trajectories side by side."""

import argparse
import os
import sys
import time
from pathlib import Path

from gridplan.runner import RunError, load_config, report_emissions, run


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("dir", nargs="?", default="demo", help="directory holding *.cfg files")
    p.add_argument("--only", nargs="*", help="config stems to run, e.g. ref_high el_high")
    a = p.parse_args(argv)
    root = Path(a.dir)
    os.chdir(root)  # configs use paths relative to their own directory
    cfgs = sorted(Path(".").glob("*.cfg"))
    if a.only:
        cfgs = [c for c in cfgs if c.stem in a.only]
    if not cfgs:
        print(f"no configs found in {root}", file=sys.stderr)
        return 1
    done, failed = [], 0
    for path in cfgs:
        t0 = time.perf_counter()
        try:
            res = run(load_config(path))
        except RunError as exc:
            failed += 1
            print(f"{path.stem:10s} FAILED {exc}")
            continue
        done.append(res)
        print(f"{path.stem:10s} objective {res.objective:.6g}  ({time.perf_counter() - t0:.1f} s)")
    if done:
        print(report_emissions(done).to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
