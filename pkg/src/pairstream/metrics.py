"""AUC, regret against a batch comparator, and stochastic-gradient variance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .losses import pair_coefficients, pair_grads
from .rff import MappedExample


class UndefinedAUCError(ValueError):
    pass


class ComparatorError(RuntimeError):
    def __init__(self, msg: str, grad_norm: float):
        super().__init__(f"{msg} (last gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


def auc(scores, labels) -> float:
    """Wilcoxon-Mann-Whitney AUC with ties counted as one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both classes")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def _as_arrays(history):
    if isinstance(history, tuple):
        R, Y = history
        return np.asarray(R, dtype=float), np.asarray(Y, dtype=float)
    if len(history) == 0:
        raise ValueError("empty history")
    return np.stack([h.r for h in history]), np.array([h.label for h in history])


# --- batch comparator ------------------------------------------------------

_BLOCK = 512


def _pair_weight_block(rows: slice, Y: np.ndarray) -> np.ndarray:
    """Weights of the directed pairs that appear in the summed local losses.

    The pair of 0-based positions ``p != q`` enters ``L_{max(p,q)+1}`` with weight
    ``1 / max(p, q)`` when the labels differ.
    """
    P = np.arange(rows.start, rows.stop)[:, None]
    Q = np.arange(len(Y))[None, :]
    top = np.maximum(P, Q)
    W = np.where((Y[rows, None] != Y[None, :]) & (top > 0), 1.0 / np.maximum(top, 1), 0.0)
    return W


def _squared_quadratic(R: np.ndarray, Y: np.ndarray):
    """``(A, h, c0)`` with ``sum_t L_t(w) = c0 - 2 h.w + w.A.w`` for the squared AUC loss."""
    T, D = R.shape
    A = np.zeros((D, D))
    h = np.zeros(D)
    c0 = 0.0
    for start in range(0, T, _BLOCK):
        rows = slice(start, min(T, start + _BLOCK))
        W = _pair_weight_block(rows, Y)
        deg = W.sum(axis=1)
        b = (W * (Y[rows, None] - Y[None, :]) / 2).sum(axis=1)
        Rb = R[rows]
        A += Rb.T @ (deg[:, None] * Rb) - Rb.T @ (W @ R)
        h += Rb.T @ b
        c0 += deg.sum() / 2
    return A, h, c0


def summed_local_loss(kind: str, s: np.ndarray, Y: np.ndarray):
    """``sum_{t>=2} L_t`` and its gradient with respect to the score vector ``s``."""
    value = 0.0
    gs = np.zeros(len(Y))
    for t in range(1, len(Y)):
        vals, coef = pair_coefficients(kind, s[t], Y[t], s[:t], Y[:t])
        value += vals.sum() / t
        gs[t] += coef.sum() / t
        gs[:t] -= coef / t
    return value, gs


def batch_comparator(R, Y, kind: str = "squared_auc", lam: float = 0.0, tol: float = 1e-6,
                     max_iter: int = 200_000) -> np.ndarray:
    """Minimize ``sum_{t=2}^T L_t(w) + lam/2 ||w||^2`` over feature space.

    Full-batch accelerated gradient descent (step ``1/L``, adaptive restart)
    until the gradient norm drops to ``tol``. The squared loss is handled through
    its exact quadratic form; other losses recompute all pairs every iteration.
    """
    R = np.asarray(R, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if len(Y) < 2:
        raise ValueError("comparator needs at least two examples")
    D = R.shape[1]
    if kind == "squared_auc":
        A, h, _ = _squared_quadratic(R, Y)

        def grad(w):
            return 2.0 * (A @ w) - 2.0 * h + lam * w

        L = 2.0 * max(np.linalg.eigvalsh(A)[-1], 0.0) + lam
    else:
        def grad(w):
            return R.T @ summed_local_loss(kind, R @ w, Y)[1] + lam * w

        L = 2.0 * np.linalg.norm(R, 2) ** 2 + lam
    if L <= 0:
        return np.zeros(D)
    x = np.zeros(D)
    g = grad(x)
    if np.linalg.norm(g) <= tol:
        return x
    y, tk = x.copy(), 1.0
    for _ in range(max_iter):
        x_new = y - grad(y) / L
        g = grad(x_new)
        if np.linalg.norm(g) <= tol:
            return x_new
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * tk * tk)) / 2.0
        if (y - x_new) @ (x_new - x) > 0:
            t_new, y = 1.0, x_new.copy()
        else:
            y = x_new + (tk - 1.0) / t_new * (x_new - x)
        x, tk = x_new, t_new
    raise ComparatorError("comparator did not converge", float(np.linalg.norm(g)))


def comparator_objective(R, Y, w, kind: str = "squared_auc", lam: float = 0.0) -> float:
    R = np.asarray(R, dtype=float)
    return summed_local_loss(kind, R @ w, np.asarray(Y, dtype=float))[0] + lam / 2 * (w @ w)


# --- regret -------------------------------------------------------------------

@dataclass
class RegretTrace:
    t: np.ndarray
    online: np.ndarray       # L_t(w_{t-1})
    comparator: np.ndarray   # L_t(w*)
    cum_regret: np.ndarray
    stride: int = 1


def regret_steps(T: int) -> list[int]:
    """Evaluation steps: every step up to ``T = 2000``, every ``ceil(T/500)``-th beyond.

    The last step ``T`` is always included.
    """
    stride = 1 if T <= 2000 else math.ceil(T / 500)
    steps = list(range(2, T + 1, stride))
    if steps[-1] != T:
        steps.append(T)
    return steps


def regret(snapshots: Mapping[int, np.ndarray], R, Y, w_star, kind: str = "squared_auc",
           steps: Sequence[int] | None = None) -> RegretTrace:
    """Cumulative regret of the online models against ``w_star``.

    ``snapshots[t]`` is the model ``w_{t-1}`` that faced example ``t``. On a
    decimated step grid each evaluated term stands in for the steps since the
    previous grid point, so ``cum_regret[k]`` estimates ``R(steps[k])``.
    """
    R = np.asarray(R, dtype=float)
    Y = np.asarray(Y, dtype=float)
    T = len(Y)
    steps = regret_steps(T) if steps is None else sorted(steps)
    s_star = R @ w_star
    online = np.empty(len(steps))
    comp = np.empty(len(steps))
    span = np.diff([1] + list(steps))
    for k, t in enumerate(steps):
        if t not in snapshots:
            raise KeyError(f"no model snapshot for step {t}")
        i = t - 1
        s = R[:t] @ snapshots[t]
        online[k] = pair_coefficients(kind, s[i], Y[i], s[:i], Y[:i])[0].mean()
        comp[k] = pair_coefficients(kind, s_star[i], Y[i], s_star[:i], Y[:i])[0].mean()
    stride = int(span.max()) if len(span) else 1
    cum = np.cumsum((online - comp) * span)
    return RegretTrace(np.asarray(steps), online, comp, cum, stride)


# --- variance -----------------------------------------------------------------

@dataclass
class VarianceReport:
    t: int
    v_stratified: float
    v_uniform: float
    certificate_ok: bool
    kappa: int = 0


def _spread(G: np.ndarray) -> float:
    """Trace covariance ``E||g - E g||^2`` of equally likely rows."""
    return float(((G - G.mean(axis=0)) ** 2).sum(axis=1).mean())


def exact_variance(kind: str, w, z: MappedExample, history, partition, t: int | None = None,
                   tol: float = 1e-12) -> VarianceReport:
    """Exact variance of the stratified and single-uniform-draw gradient estimators.

    ``partition[i]`` is the stratum of history example ``i``.
    """
    R, Y = _as_arrays(history)
    partition = np.asarray(partition)
    n = len(Y)
    if partition.shape != (n,):
        raise ValueError(f"partition covers {partition.size} of {n} history examples")
    G = pair_grads(kind, np.asarray(w, dtype=float), z.r, z.label, R, Y)
    v_uniform = _spread(G)
    v_strat = 0.0
    labels = np.unique(partition)
    for j in labels:
        Gj = G[partition == j]
        v_strat += (len(Gj) / n) ** 2 * _spread(Gj)
    return VarianceReport(n + 1 if t is None else t, v_strat, v_uniform,
                          bool(v_strat <= v_uniform + tol), len(labels))


def _scheme_draws(scheme, partition, n: int, rng, n_samples: int):
    if callable(scheme):
        return scheme(rng, n_samples)
    if scheme == "uniform":
        return rng.integers(n, size=(n_samples, 1)), np.ones(1)
    members = [np.flatnonzero(partition == j) for j in np.unique(partition)]
    weights = np.array([len(m) / n for m in members])
    if scheme == "fifo":
        last = np.array([m[-1] for m in members])
        return np.broadcast_to(last, (n_samples, len(members))), weights
    if scheme == "stratified":
        cols = [m[rng.integers(len(m), size=n_samples)] for m in members]
        return np.stack(cols, axis=1), weights
    raise ValueError(f"unknown buffer scheme {scheme!r}")


def mc_variance(kind: str, w, z: MappedExample, history,
                scheme: str | Callable = "stratified", n_samples: int = 10_000, seed: int = 0,
                partition=None) -> float:
    """Monte-Carlo trace covariance of a buffer gradient estimator.

    ``scheme`` is ``"uniform"`` (one uniform history draw), ``"stratified"`` (one
    uniform draw per stratum, weighted by stratum size), ``"fifo"`` (most recent
    member per stratum), or a callable ``(rng, n_samples) -> (indices, weights)``.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    R, Y = _as_arrays(history)
    n = len(Y)
    if partition is None:
        partition = np.zeros(n, dtype=int)
    partition = np.asarray(partition)
    G = pair_grads(kind, np.asarray(w, dtype=float), z.r, z.label, R, Y)
    rng = np.random.Generator(np.random.PCG64(seed))
    idx, weights = _scheme_draws(scheme, partition, n, rng, n_samples)
    est = np.zeros((n_samples, G.shape[1]))
    for col, p in enumerate(weights):
        est += p * G[idx[:, col]]
    est -= est[0]  # shift first so identical draws give exactly zero
    centered = est - est.mean(axis=0)
    return float((centered ** 2).sum() / (n_samples - 1))
