"""Exact stratified vs single-draw gradient variance along one run on the XOR mixture."""

import argparse

import numpy as np

from pairstream import RunConfig, exact_variance, gaussian_mixture_stream, run
from pairstream.rff import MappedExample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=2000)
    ap.add_argument("--every", type=int, default=100)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--s-max", type=int, default=16)
    args = ap.parse_args()

    X, y = gaussian_mixture_stream(args.T, seed=0)
    checkpoints = list(range(args.every, args.T + 1, args.every))
    traj, _ = run(X, y, RunConfig(eps=args.eps, s_max=args.s_max), snapshot_steps=checkpoints,
                  keep_mapped=True)
    R = traj.mapped
    print(f"{'t':>6} {'kappa':>5} {'V_strat':>10} {'V_unif':>10} ratio")
    for t in checkpoints:
        z = MappedExample(R[t - 1], y[t - 1], t)
        rep = exact_variance("squared_auc", traj.snapshots[t], z, (R[:t - 1], y[:t - 1]),
                             traj.partition(t), t)
        ratio = rep.v_stratified / rep.v_uniform if rep.v_uniform else np.nan
        print(f"{t:>6} {rep.kappa:>5} {rep.v_stratified:>10.3e} {rep.v_uniform:>10.3e} {ratio:.3f}")


if __name__ == "__main__":
    main()
