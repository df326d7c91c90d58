"""Fusion-weight sweep: test CI per loss and (w_nv, w_v) grid point.

    python3 scripts/run_fusion_sweep.py configs/benchmark.cfg --seeds 3 --jobs 4
"""

import argparse
from pathlib import Path

import numpy as np

from wcisurv import config as cfgmod
from wcisurv import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="out/fusion")
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = cfgmod.load(args.config).validate()
    rows = ex.sweep_fusion(cfg, n_seeds=args.seeds, jobs=args.jobs)
    ex.write_atomic(Path(args.out) / "sweep_fusion.csv", ex.csv_text(cfg.hash(), ex.FUSION_HEADER, rows))
    grid = [tuple(w) for w in cfg.fusion_grid]
    print(f"{'loss':<11}" + "".join(f"{a:g}:{b:g}".rjust(10) for a, b in grid))
    for loss in cfg.sweep_losses:
        cells = [np.median([r[4] for r in rows if r[2] == loss and (r[0], r[1]) == w]) for w in grid]
        print(f"{loss:<11}" + "".join(f"{c:>10.4f}" for c in cells))


if __name__ == "__main__":
    main()
