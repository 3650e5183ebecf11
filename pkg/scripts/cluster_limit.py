"""Held-out AUC and final strata count as the cluster cap s_max varies (diabetes)."""

import argparse
from dataclasses import replace

import numpy as np

from pairstream import RunConfig, auc, k_folds, load_dataset, order_stream, run
from pairstream.learner import decision_scores


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default="data/diabetes")
    ap.add_argument("--caps", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32, 64])
    ap.add_argument("--eps", type=float, default=0.01)
    args = ap.parse_args()

    ds = load_dataset(args.data)
    folds = k_folds(ds, 3, seed=0)
    base = RunConfig(eta=0.5, lam=1e-4, eps=args.eps)
    for cap in args.caps:
        scores, kappas = [], []
        for train, test in folds:
            X, y, ids = train.to_arrays(order_stream(train, "iid_shuffle", seed=0))
            traj, model = run(X, y, replace(base, s_max=cap), ids=ids)
            Xte, yte, _ = test.to_arrays()
            scores.append(auc(decision_scores(model, traj.fmap, Xte), yte))
            kappas.append(traj.buffer.kappa)
        print(f"s_max={cap:<4d} auc={100 * np.mean(scores):.2f}  kappa_T={kappas}")


if __name__ == "__main__":
    main()
