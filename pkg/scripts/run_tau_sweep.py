"""Temperature sweep: train WCI models across tau values and seeds, print median test CI.

    python3 scripts/run_tau_sweep.py configs/benchmark.cfg --out out/tau --jobs 4
"""

import argparse
from pathlib import Path

import numpy as np

from wcisurv import config as cfgmod
from wcisurv import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="out/tau")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = cfgmod.load(args.config).validate()
    rows = ex.sweep_tau(cfg, jobs=args.jobs)
    ex.write_atomic(Path(args.out) / "sweep_tau.csv", ex.csv_text(cfg.hash(), ex.TAU_HEADER, rows))
    print(f"{'tau':>8} {'median CI':>10} {'median AUC':>11}")
    for tau in cfg.taus:
        sel = [r for r in rows if r[0] == tau]
        print(f"{tau:>8g} {np.median([r[2] for r in sel]):>10.4f} {np.nanmedian([r[3] for r in sel]):>11.4f}")


if __name__ == "__main__":
    main()
