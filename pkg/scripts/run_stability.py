"""Per-batch loss stability of WCI against BCI under skewed and uniform sampling.

    python3 scripts/run_stability.py configs/benchmark.cfg --out out/stability
"""

import argparse
from pathlib import Path

import numpy as np

from wcisurv import config as cfgmod
from wcisurv import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="out/stability")
    ap.add_argument("--tau", type=float, help="WCI temperature (overrides stability.tau)")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = cfgmod.load(args.config).validate()
    if args.tau is not None:
        cfg.stability_tau = args.tau
    rows = ex.stability(cfg, jobs=args.jobs)
    ex.write_atomic(Path(args.out) / "stability.csv", ex.csv_text(cfg.hash(), ex.STABILITY_HEADER, rows))
    for sampler in ("skewed", "uniform"):
        wins, total = ex.stability_wins(rows, sampler)
        cv = {name: np.median([r[7] for r in rows if r[0] == sampler and r[1] == name]) for name in ("wci", "bci")}
        print(f"{sampler:<8} median cv wci {cv['wci']:.4f}  bci {cv['bci']:.4f}  wci <= bci in {wins}/{total} seeds")


if __name__ == "__main__":
    main()
