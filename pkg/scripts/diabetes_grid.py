"""Full eta x lam grid on diabetes; prints the best cell and the top of the table."""

import argparse
import time

from pairstream import grid_search, load_dataset
from pairstream.dataio import SCALINGS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="data/diabetes")
    ap.add_argument("--scaling", default="minmax_l2", choices=SCALINGS)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    ds = load_dataset(args.data, scaling=args.scaling)
    start = time.perf_counter()
    best, table = grid_search(ds, k=3, seed=args.seed, n_jobs=args.jobs)
    secs = time.perf_counter() - start
    table.sort(key=lambda r: -r["mean_auc"] if r["mean_auc"] == r["mean_auc"] else 1.0)
    print(f"scaling={args.scaling}  best eta={best.eta:g} lam={best.lam:g}  ({secs:.1f} s)")
    for r in table[:8]:
        print(f"  eta={r['eta']:<10g} lam={r['lam']:<8g} auc={100 * r['mean_auc']:.2f} "
              f"+/- {100 * r['stderr']:.2f}")


if __name__ == "__main__":
    main()
