#!/usr/bin/env python3
"""Time the full pipeline on Erdos-Renyi graphs of increasing size and write
log-log plot data (optionally a PNG if matplotlib is available)."""

import argparse
import logging

import numpy as np

from tempowalk.bench import run_scaling
from tempowalk.embedder import TrainConfig
from tempowalk.walker import WalkConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="1e3,1e4,1e5")
    ap.add_argument("--avg-degree", type=float, default=10.0)
    ap.add_argument("--snapshots", type=int, default=10)
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="scaling.tsv")
    ap.add_argument("--plot", help="PNG path for a log-log figure")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    sizes = [int(float(s)) for s in args.sizes.split(",")]
    res = run_scaling(sizes, avg_degree=args.avg_degree, num_snapshots=args.snapshots, runs=args.runs,
                      walk_cfg=WalkConfig(workers=args.workers),
                      train_cfg=TrainConfig(epochs=args.epochs, workers=args.workers), out_path=args.out)
    for pt in res.points:
        print(f"{pt.num_edges}\t{pt.num_nodes}\t{pt.wall_time_seconds:.3f}\t{pt.error or ''}")
    print("slope", "undefined" if res.slope is None else f"{res.slope:.3f}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        ok = [p for p in res.points if p.error is None]
        x = np.log10([p.num_nodes for p in ok])
        y = np.log10([p.wall_time_seconds for p in ok])
        plt.plot(x, y, "o-")
        plt.xlabel("log10 nodes")
        plt.ylabel("log10 seconds")
        plt.savefig(args.plot, dpi=120)


if __name__ == "__main__":
    main()
