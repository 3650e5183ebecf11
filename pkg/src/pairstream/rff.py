"""Random Fourier features for the Gaussian kernel and the pairwise kernel built on it.

The kernel is ``G(x, x') = exp(-gamma * ||x - x'||^2)``. Frequencies are drawn
from ``N(0, 2 * gamma * I)`` so that ``E[cos(q^T (x - x'))] = G(x, x')``, and the
feature map uses the ``sqrt(2/D)`` scaling, which puts every mapped point on
the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PRNG = "numpy.PCG64/standard_normal"


@dataclass(frozen=True)
class MappedExample:
    r: np.ndarray
    label: float
    id: int = 0


@dataclass(frozen=True, eq=False)
class FourierMap:
    freqs: np.ndarray  # shape (D/2, d)
    gamma: float
    seed: int

    @property
    def n_features(self) -> int:
        return 2 * self.freqs.shape[0]

    @property
    def dim(self) -> int:
        return self.freqs.shape[1]

    def _pad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        if d > self.dim:
            raise ValueError(f"input dimension {d} exceeds map dimension {self.dim}")
        if d < self.dim:
            pad = [(0, 0)] * (x.ndim - 1) + [(0, self.dim - d)]
            x = np.pad(x, pad)
        return x

    def map(self, x) -> np.ndarray:
        """Map one point (1-D) or a batch (2-D, one row per point).

        Output entry ``2i`` holds the cosine and ``2i+1`` the sine of the ``i``-th
        frequency projection.
        """
        x = self._pad(x)
        proj = x @ self.freqs.T
        out = np.empty(proj.shape[:-1] + (self.n_features,))
        out[..., 0::2] = np.cos(proj)
        out[..., 1::2] = np.sin(proj)
        out *= math.sqrt(2.0 / self.n_features)
        return out

    def to_text(self, include_matrix: bool = False) -> str:
        lines = [f"d={self.dim}", f"D={self.n_features}", f"gamma={self.gamma!r}",
                 f"seed={self.seed}", f"prng={PRNG}"]
        if include_matrix:
            lines += [" ".join(repr(float(v)) for v in row) for row in self.freqs]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FourierMap":
        """Rebuild from a sidecar; a dumped matrix, if present, must match the seed."""
        lines = text.strip().splitlines()
        kv = dict(line.split("=", 1) for line in lines[:5])
        fmap = sample_map(int(kv["d"]), int(kv["D"]), float(kv["gamma"]), int(kv["seed"]))
        if len(lines) > 5:
            dumped = np.array([[float(v) for v in row.split()] for row in lines[5:]])
            if not np.array_equal(dumped, fmap.freqs):
                raise ValueError("dumped frequency matrix does not match the seed")
        return fmap


def sample_map(d: int, n_features: int, gamma: float, seed: int = 0) -> FourierMap:
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if n_features < 2 or n_features % 2:
        raise ValueError(f"number of features must be even and >= 2, got {n_features}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rng = np.random.Generator(np.random.PCG64(seed))
    freqs = math.sqrt(2.0 * gamma) * rng.standard_normal((n_features // 2, d))
    freqs.setflags(write=False)
    return FourierMap(freqs, float(gamma), int(seed))


def gauss_kernel(x, x2, gamma: float) -> float:
    delta = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    return float(np.exp(-gamma * (delta @ delta)))


def approx_kernel(fmap: FourierMap, x, x2) -> float:
    return float(fmap.map(x) @ fmap.map(x2))


def approx_kernel_cos(fmap: FourierMap, x, x2) -> float:
    """Cosine form ``(2/D) sum_i cos(q_i^T (x - x'))`` of :func:`approx_kernel`."""
    delta = fmap._pad(x) - fmap._pad(x2)
    return float(2.0 / fmap.n_features * np.cos(fmap.freqs @ delta).sum())


def pairwise_kernel(x1, x2, x1p, x2p, gamma: float) -> float:
    # grouped so that x1 == x2 cancels exactly
    return ((gauss_kernel(x1, x1p, gamma) - gauss_kernel(x2, x1p, gamma))
            + (gauss_kernel(x2, x2p, gamma) - gauss_kernel(x1, x2p, gamma)))


def approx_pairwise_kernel(fmap: FourierMap, x1, x2, x1p, x2p) -> float:
    return float((fmap.map(x1) - fmap.map(x2)) @ (fmap.map(x1p) - fmap.map(x2p)))


def _even(n: float) -> int:
    n = max(2, math.ceil(n))
    return n + (n % 2)


def rff_count(T: int, regime: str = "default", c: float = 1.0) -> int:
    """Number of random features for a horizon of ``T`` examples.

    Regimes follow the eigenvalue-decay cases: ``default`` (Gaussian kernel,
    ``sqrt(T) ln T``), ``slow_decay`` (``5 T ln 2T``), ``poly_decay``
    (``T^(1/2c) ln T``) and ``geometric`` (``ln^2 T``). Always even and >= 2.
    """
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    if regime == "default":
        return _even(math.sqrt(T) * math.log(T))
    if regime == "slow_decay":
        return _even(5 * T * math.log(2 * T))
    if regime == "poly_decay":
        if c <= 0:
            raise ValueError(f"decay exponent c must be positive, got {c}")
        return _even(T ** (1.0 / (2 * c)) * math.log(T))
    if regime == "geometric":
        return _even(math.log(T) ** 2)
    raise ValueError(f"unknown regime {regime!r}")
