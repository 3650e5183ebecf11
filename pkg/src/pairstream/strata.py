"""Online stratified sampling buffer.

Each stratum is an ``eps``-ball (squared distance) around an incrementally
updated centroid in feature space and keeps one buffered representative.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .rff import MappedExample


class BufferError(RuntimeError):
    pass


class InvariantError(AssertionError):
    pass


def update_centroid(c: np.ndarray, r: np.ndarray, eta_c: float) -> np.ndarray:
    if not 0 < eta_c <= 1:
        raise ValueError(f"centroid step must lie in (0, 1], got {eta_c}")
    return c + eta_c * (r - c)


def max_clusters_bound(R: float, eps: float, d: int, t: int) -> int:
    """Worst-case number of ``eps``-balls in a radius-``R`` space after ``t - 1`` examples."""
    if R <= 0 or eps <= 0 or d < 1:
        raise ValueError("need R > 0, eps > 0, d >= 1")
    try:
        cover = math.ceil((R / eps) ** d)
    except OverflowError:
        return t - 1
    return min(t - 1, cover)


@dataclass
class Stratum:
    centroid: np.ndarray
    count: int
    rep: MappedExample
    label_key: float | None = None


class StrataBuffer:
    """Strata over mapped examples with FIFO or per-stratum reservoir replacement.

    ``eta_c`` is either a constant centroid step in (0, 1] or ``"running_mean"``
    (step ``1/count``, which keeps each centroid at its members' exact mean).
    ``s_max=None`` leaves the number of strata uncapped; once the cap is hit,
    far-away examples join their nearest stratum.
    """

    def __init__(self, eps: float, s_max: int | None = None, policy: str = "fifo",
                 eta_c: float | str = 0.1, stratify_by_label: bool = True, seed: int = 0,
                 check: bool = True):
        if policy not in ("fifo", "reservoir"):
            raise ValueError(f"unknown policy {policy!r}")
        if s_max is not None and s_max < 1:
            raise ValueError("s_max must be >= 1")
        if eta_c != "running_mean" and not 0 < float(eta_c) <= 1:
            raise ValueError(f"centroid step must lie in (0, 1], got {eta_c}")
        self.eps = eps
        self.s_max = s_max
        self.policy = policy
        self.eta_c = eta_c
        self._step = None if eta_c == "running_mean" else float(eta_c)
        self.stratify_by_label = stratify_by_label
        self.seed = seed
        self.check = check
        self.rng = np.random.default_rng(seed)  # PCG64; a Generator is used as-is
        self.kappa = 0
        self.n_seen = 0
        self.assignments: list[int] = []
        self._counts: list[int] = []
        self._reps: list[MappedExample] = []

    def _grow(self, dim: int):
        cap = max(8, 2 * self.kappa)
        if self.kappa == 0:
            self._C = np.empty((cap, dim))
            self._R = np.empty((cap, dim))
            self._Y = np.empty(cap)
            self._keys = np.empty(cap)
        elif self.kappa == self._C.shape[0]:
            self._C = np.resize(self._C, (cap, dim))
            self._R = np.resize(self._R, (cap, dim))
            self._Y = np.resize(self._Y, cap)
            self._keys = np.resize(self._keys, cap)

    def _key(self, z: MappedExample) -> float:
        return z.label if self.stratify_by_label else 0.0

    def _open(self, z: MappedExample) -> int:
        self._grow(z.r.shape[0])
        j = self.kappa
        self._C[j] = z.r
        self._R[j] = z.r
        self._Y[j] = z.label
        self._keys[j] = self._key(z)
        self._counts.append(0)
        self._reps.append(z)
        self.kappa += 1
        return j

    def initialize(self, z: MappedExample):
        if self.kappa:
            raise BufferError("buffer already initialized")
        j = self._open(z)
        self._counts[j] = 1
        self.n_seen = 1
        self.assignments.append(j)

    def assign(self, z: MappedExample) -> int:
        """Pick the stratum for ``z``, opening a new one (count 0) if none is within ``eps``."""
        if not self.kappa:
            raise BufferError("buffer is uninitialized")
        diff = self._C[:self.kappa] - z.r
        dist = (diff * diff).sum(axis=1)
        if self.stratify_by_label:
            same = self._keys[:self.kappa] == self._key(z)
            masked = np.where(same, dist, np.inf)
        else:
            same, masked = None, dist
        j = int(masked.argmin())
        # an all-inf mask would otherwise match under eps = inf
        if masked[j] <= self.eps and (same is None or same[j]):
            return j
        if self.s_max is None or self.kappa < self.s_max:
            return self._open(z)
        if same is not None and not same.any():
            return int(np.argmin(dist))
        return j

    def _absorb(self, z: MappedExample, j: int, replace: bool):
        self._counts[j] += 1
        self.n_seen += 1
        self.assignments.append(j)
        if replace:
            self._reps[j] = z
            self._R[j] = z.r
            self._Y[j] = z.label
        step = 1.0 / self._counts[j] if self.eta_c == "running_mean" else self._step
        c = self._C[j]
        c += step * (z.r - c)  # update_centroid, in place
        if self.check:
            self.check_invariants()

    def update_fifo(self, z: MappedExample, j: int):
        self._absorb(z, j, True)

    def update_reservoir(self, z: MappedExample, j: int):
        replace = self.rng.random() < 1.0 / (self._counts[j] + 1)
        self._absorb(z, j, replace)

    def update(self, z: MappedExample) -> int:
        """One online stratified sampling step; returns the stratum index used."""
        j = self.assign(z)
        if self.policy == "fifo":
            self.update_fifo(z, j)
        else:
            self.update_reservoir(z, j)
        return j

    def check_invariants(self):
        cap = self.n_seen if self.s_max is None else min(self.n_seen, self.s_max)
        if self.kappa > cap:
            raise InvariantError(f"{self.kappa} strata exceed cap {cap}")
        if sum(self._counts) != self.n_seen:
            raise InvariantError("stratum counts do not partition the history")

    def counts(self) -> np.ndarray:
        return np.array(self._counts, dtype=np.int64)

    def weights(self, t: int) -> np.ndarray:
        """Stratum weights ``count_j / (t - 1)`` at step ``t``."""
        if t < 2:
            raise ValueError("weights need t >= 2")
        if sum(self._counts) != t - 1:
            raise InvariantError(f"counts sum to {sum(self._counts)}, expected {t - 1}")
        return self.counts() / (t - 1)

    def rep_arrays(self, t: int):
        """``(reps, labels, weights)`` for the buffer gradient at step ``t``."""
        return self._R[:self.kappa], self._Y[:self.kappa], self.weights(t)

    @property
    def strata(self) -> list[Stratum]:
        keys = [float(k) if self.stratify_by_label else None for k in self._keys[:self.kappa]]
        return [Stratum(self._C[j].copy(), self._counts[j], self._reps[j], keys[j])
                for j in range(self.kappa)]

    def snapshot_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        dim = self._C.shape[1] if self.kappa else 0
        w.writerow(["stratum", "count", "rep_id", "label_key"] + [f"c{i}" for i in range(dim)])
        for j, s in enumerate(self.strata):
            key = "" if s.label_key is None else repr(s.label_key)
            w.writerow([j, s.count, s.rep.id, key] + [repr(float(v)) for v in s.centroid])
        return out.getvalue()


class ReservoirBuffer:
    """Stream-wide reservoir of ``size`` slots with uniform weights (Algorithm R)."""

    def __init__(self, size: int, seed: int = 0):
        if size < 1:
            raise ValueError("reservoir size must be >= 1")
        self.size = size
        self.seed = seed
        self.rng = np.random.default_rng(seed)  # PCG64; a Generator is used as-is
        self.slots: list[MappedExample] = []
        self.n_seen = 0

    @property
    def kappa(self) -> int:
        return len(self.slots)

    def initialize(self, z: MappedExample):
        if self.slots:
            raise BufferError("buffer already initialized")
        self.slots.append(z)
        self.n_seen = 1

    def update(self, z: MappedExample) -> int:
        self.n_seen += 1
        if len(self.slots) < self.size:
            self.slots.append(z)
            return len(self.slots) - 1
        j = int(self.rng.integers(self.n_seen))
        if j < self.size:
            self.slots[j] = z
        return j

    def check_invariants(self):
        if self.kappa > min(self.n_seen, self.size):
            raise InvariantError("reservoir overfull")

    def rep_arrays(self, t: int):
        if not self.slots:
            raise BufferError("buffer is uninitialized")
        R = np.stack([z.r for z in self.slots])
        Y = np.array([z.label for z in self.slots])
        return R, Y, np.full(len(self.slots), 1.0 / len(self.slots))
