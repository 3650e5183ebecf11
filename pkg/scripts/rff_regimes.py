"""Feature count and held-out AUC for each rff_count regime (diabetes, one fold split)."""

import argparse
from dataclasses import replace

import numpy as np

from pairstream import RunConfig, auc, k_folds, load_dataset, order_stream, rff_count, run
from pairstream.learner import decision_scores

REGIMES = [("default", 1.0), ("geometric", 1.0), ("poly_decay", 2.0), ("poly_decay", 1.0),
           ("slow_decay", 1.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="data/diabetes")
    ap.add_argument("--max-features", type=int, default=20_000,
                    help="skip regimes asking for more features than this")
    args = ap.parse_args()

    ds = load_dataset(args.data)
    folds = k_folds(ds, 3, seed=0)
    base = RunConfig(eta=0.5, lam=1e-4)
    for regime, c in REGIMES:
        T = len(folds[0][0])
        D = rff_count(T, regime, c)
        if D > args.max_features:
            print(f"{regime:<10} c={c:g}  D={D}  skipped")
            continue
        scores = []
        for train, test in folds:
            X, y, ids = train.to_arrays(order_stream(train, "iid_shuffle", seed=0))
            traj, model = run(X, y, replace(base, rff_regime=regime, rff_c=c), ids=ids)
            Xte, yte, _ = test.to_arrays()
            scores.append(auc(decision_scores(model, traj.fmap, Xte), yte))
        print(f"{regime:<10} c={c:g}  D={D:<6d} auc={100 * np.mean(scores):.2f}")


if __name__ == "__main__":
    main()
