"""Pairwise AUC surrogate losses in feature space and the buffer/full-history gradients.

For a pair ``(z, z')`` write ``delta = r - r'`` and ``yhat = (y - y') / 2``. Pairs
with equal labels cost nothing; otherwise

* ``squared_auc``: ``(1 - yhat * w.delta)^2``
* ``hinge_auc``:   ``max(0, 1 - yhat * w.delta)``
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .rff import MappedExample
from .strata import InvariantError

KINDS = ("squared_auc", "hinge_auc")


def _check_kind(kind: str):
    if kind not in KINDS:
        raise ValueError(f"unknown loss kind {kind!r}")


def _check_dims(w, *rs):
    for r in rs:
        if r.shape[-1] != w.shape[0]:
            raise ValueError(f"dimension mismatch: weights {w.shape[0]}, features {r.shape[-1]}")


def loss_value(kind: str, w: np.ndarray, z: MappedExample, z2: MappedExample) -> float:
    _check_kind(kind)
    _check_dims(w, z.r, z2.r)
    if z.label == z2.label:
        return 0.0
    yhat = (z.label - z2.label) / 2
    slack = 1.0 - yhat * float(w @ (z.r - z2.r))
    if kind == "squared_auc":
        return slack * slack
    return max(0.0, slack)


def loss_grad(kind: str, w: np.ndarray, z: MappedExample, z2: MappedExample) -> np.ndarray:
    _check_kind(kind)
    _check_dims(w, z.r, z2.r)
    if z.label == z2.label:
        return np.zeros_like(w)
    yhat = (z.label - z2.label) / 2
    delta = z.r - z2.r
    slack = 1.0 - yhat * float(w @ delta)
    if kind == "squared_auc":
        return -2.0 * yhat * slack * delta
    if slack > 0:
        return -yhat * delta
    return np.zeros_like(w)


def pair_coefficients(kind: str, score: float, label: float, scores: np.ndarray,
                      labels: np.ndarray):
    """Per-pair losses and derivative coefficients against a batch.

    With ``s = w.r`` and ``s_i = w.r_i``, the loss of pair ``i`` is a function of
    ``s - s_i`` only, so its gradient is ``coef_i * (r - r_i)``.
    """
    yhat = (label - labels) / 2
    active = yhat != 0
    slack = 1.0 - yhat * (score - scores)
    if kind == "squared_auc":
        values = np.where(active, slack * slack, 0.0)
        coef = np.where(active, -2.0 * yhat * slack, 0.0)
    elif kind == "hinge_auc":
        on = active & (slack > 0)
        values = np.where(on, slack, 0.0)
        coef = np.where(on, -yhat, 0.0)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return values, coef


def pair_grads(kind: str, w: np.ndarray, r: np.ndarray, label: float, R: np.ndarray,
               Y: np.ndarray) -> np.ndarray:
    """Gradient of each pair ``(z, z_i)`` as the rows of a matrix."""
    _, coef = pair_coefficients(kind, float(w @ r), label, R @ w, Y)
    return coef[:, None] * (r - R)


def weighted_loss_grad(kind: str, w: np.ndarray, r: np.ndarray, label: float, R: np.ndarray,
                       Y: np.ndarray, weights: np.ndarray):
    """``(sum_i p_i loss_i, sum_i p_i grad_i)`` over a weighted batch of partners."""
    _check_dims(w, r, R)
    values, coef = pair_coefficients(kind, float(w @ r), label, R @ w, Y)
    pc = weights * coef
    grad = pc.sum() * r - pc @ R
    return float(weights @ values), grad


def buffer_loss_grad(kind: str, w: np.ndarray, z: MappedExample, buffer, t: int):
    """Suffered buffer loss and its gradient at step ``t``."""
    R, Y, p = buffer.rep_arrays(t)
    if abs(p.sum() - 1.0) > 1e-12:
        raise InvariantError(f"buffer weights sum to {p.sum()!r}")
    return weighted_loss_grad(kind, w, z.r, z.label, R, Y, p)


def buffer_grad(kind: str, w: np.ndarray, z: MappedExample, buffer, t: int) -> np.ndarray:
    return buffer_loss_grad(kind, w, z, buffer, t)[1]


def _stack(history: Sequence[MappedExample]):
    if len(history) == 0:
        raise ValueError("empty history")
    return np.stack([h.r for h in history]), np.array([h.label for h in history])


def full_grad(kind: str, w: np.ndarray, z: MappedExample, history) -> np.ndarray:
    """Gradient of the all-pairs local loss against every past example.

    ``history`` is a sequence of :class:`MappedExample` or an ``(R, Y)`` pair.
    """
    R, Y = history if isinstance(history, tuple) else _stack(history)
    if len(Y) == 0:
        raise ValueError("empty history")
    return weighted_loss_grad(kind, w, z.r, z.label, R, Y, np.full(len(Y), 1.0 / len(Y)))[1]


def local_loss(kind: str, w: np.ndarray, z: MappedExample, history) -> float:
    R, Y = history if isinstance(history, tuple) else _stack(history)
    if len(Y) == 0:
        raise ValueError("empty history")
    return weighted_loss_grad(kind, w, z.r, z.label, R, Y, np.full(len(Y), 1.0 / len(Y)))[0]


def regularized_direction(v: np.ndarray, w: np.ndarray, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("regularization must be nonnegative")
    return v + lam * w
