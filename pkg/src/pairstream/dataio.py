"""LIBSVM parsing, label binarization, row normalization and stream ordering."""

from __future__ import annotations

import io
import math
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np
from sklearn.model_selection import StratifiedKFold


class ParseError(ValueError):
    pass


class DegenerateDatasetError(ValueError):
    pass


class StratificationError(ValueError):
    pass


class InvalidFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    """One labelled sparse example; ``id`` is its 1-based position in the source."""

    features: dict[int, float]
    label: float
    id: int

    def dense(self, d: int) -> np.ndarray:
        x = np.zeros(d)
        for j, v in self.features.items():
            x[j - 1] = v
        return x


@dataclass
class Dataset:
    examples: list[Example]
    dim: int = 0
    counts: dict[float, int] = field(default_factory=dict)

    def __post_init__(self):
        top = max((max(e.features, default=0) for e in self.examples), default=0)
        self.dim = max(self.dim, top)
        self.counts = {}
        for e in self.examples:
            self.counts[e.label] = self.counts.get(e.label, 0) + 1

    def __len__(self) -> int:
        return len(self.examples)

    def subset(self, ids: Iterable[int]) -> "Dataset":
        keep = set(ids)
        return Dataset([e for e in self.examples if e.id in keep], dim=self.dim)

    def to_arrays(self, examples: Sequence[Example] | None = None):
        """Dense ``(X, y, ids)`` for ``examples`` (default: all, in stored order)."""
        exs = self.examples if examples is None else examples
        X = np.zeros((len(exs), self.dim))
        for row, e in enumerate(exs):
            for j, v in e.features.items():
                X[row, j - 1] = v
        y = np.array([e.label for e in exs], dtype=float)
        ids = np.array([e.id for e in exs], dtype=int)
        return X, y, ids


def parse_libsvm(source: str | TextIO | Iterable[str]) -> Dataset:
    """Parse LIBSVM text (``<label> <idx>:<val> ...``) from a string or line stream.

    Blank lines are skipped. Use :func:`read_libsvm` for paths.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    examples = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"non-numeric label {tokens[0]!r} at line {lineno}") from None
        feats: dict[int, float] = {}
        last = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed token {tok!r} at line {lineno}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(f"malformed index {idx_s!r} at line {lineno}") from None
            try:
                val = float(val_s)
            except ValueError:
                raise ParseError(f"non-numeric value {val_s!r} at line {lineno}") from None
            if idx < 1:
                raise ParseError(f"zero or negative index at line {lineno}")
            if idx <= last:
                raise ParseError(f"non-ascending index at line {lineno}")
            if not math.isfinite(val):
                raise ParseError(f"non-finite value at line {lineno}")
            feats[idx] = val
            last = idx
        examples.append(Example(feats, label, len(examples) + 1))
    return Dataset(examples)


def read_libsvm(path: str | os.PathLike) -> Dataset:
    """Read a LIBSVM file; ``"-"`` reads standard input."""
    if str(path) == "-":
        return parse_libsvm(sys.stdin)
    with open(path) as fh:
        return parse_libsvm(fh)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


def serialize_libsvm(dataset: Dataset) -> str:
    out = io.StringIO()
    for e in dataset.examples:
        parts = [_fmt(e.label)] + [f"{j}:{_fmt(v)}" for j, v in e.features.items()]
        out.write(" ".join(parts) + "\n")
    return out.getvalue()


def binarize_labels(dataset: Dataset, threshold: float | None = None) -> Dataset:
    """Map labels ``<= threshold`` to -1 and the rest to +1.

    The default threshold is the median of the distinct class ids, which splits
    the classes evenly.
    """
    classes = sorted(dataset.counts)
    if threshold is None:
        threshold = float(np.median(classes))
    exs = [replace(e, label=-1.0 if e.label <= threshold else 1.0) for e in dataset.examples]
    out = Dataset(exs, dim=dataset.dim)
    if len(out.counts) < 2:
        raise DegenerateDatasetError(f"only one class remains after binarizing at {threshold}")
    return out


def normalize(dataset: Dataset) -> Dataset:
    """Scale each example to unit l2 norm; all-zero rows stay zero."""
    exs = []
    for e in dataset.examples:
        norm = math.sqrt(sum(v * v for v in e.features.values()))
        if norm > 0:
            feats = {j: v / norm for j, v in e.features.items()}
        else:
            feats = dict(e.features)
        exs.append(replace(e, features=feats))
    return Dataset(exs, dim=dataset.dim)


def scale_features(dataset: Dataset) -> Dataset:
    """Per-feature min-max scaling to [-1, 1] (missing entries count as 0)."""
    X, _, _ = dataset.to_arrays()
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    exs = []
    for e in dataset.examples:
        feats = {}
        for j in range(1, dataset.dim + 1):
            v = 2.0 * (e.features.get(j, 0.0) - lo[j - 1]) / span[j - 1] - 1.0
            if hi[j - 1] > lo[j - 1] and v != 0.0:
                feats[j] = float(v)
        exs.append(replace(e, features=feats))
    return Dataset(exs, dim=dataset.dim)


def order_stream(dataset: Dataset, mode: str = "iid_shuffle", seed: int = 0,
                 feature: int | None = None) -> list[Example]:
    """Order examples as an online stream.

    ``iid_shuffle`` draws a uniform permutation from ``seed``;
    ``sorted_by_feature`` sorts ascending on ``feature`` (1-based, missing = 0)
    with ties broken by original id.
    """
    if mode == "iid_shuffle":
        perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(dataset))
        return [dataset.examples[i] for i in perm]
    if mode == "sorted_by_feature":
        if feature is None or feature < 1 or feature > dataset.dim:
            raise InvalidFeatureError(f"feature {feature} outside 1..{dataset.dim}")
        return sorted(dataset.examples, key=lambda e: (e.features.get(feature, 0.0), e.id))
    raise ValueError(f"unknown stream mode {mode!r}")


def k_folds(dataset: Dataset, k: int = 3, seed: int = 0) -> list[tuple[Dataset, Dataset]]:
    """Label-stratified ``k``-fold (train, test) splits, deterministic in ``seed``."""
    if k < 2 or len(dataset) < k:
        raise StratificationError(f"need 2 <= k <= n, got k={k}, n={len(dataset)}")
    if k > min(dataset.counts.values()):
        raise StratificationError(f"k={k} exceeds the smallest class count {min(dataset.counts.values())}")
    y = np.array([e.label for e in dataset.examples])
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    splits = []
    for tr, te in skf.split(np.zeros(len(y)), y):
        train = Dataset([dataset.examples[i] for i in tr], dim=dataset.dim)
        test = Dataset([dataset.examples[i] for i in te], dim=dataset.dim)
        splits.append((train, test))
    return splits


SCALINGS = ("minmax_l2", "unit_l2", "minmax", "none")


def load_dataset(path, threshold: float | None = None, scaling: str = "minmax_l2") -> Dataset:
    """Parse, binarize and scale a LIBSVM file in one go.

    ``minmax_l2`` scales every feature to [-1, 1] and then each row to unit l2
    norm; ``unit_l2`` only does the row step.
    """
    ds = binarize_labels(read_libsvm(path), threshold)
    if scaling == "minmax_l2":
        return normalize(scale_features(ds))
    if scaling == "unit_l2":
        return normalize(ds)
    if scaling == "minmax":
        return scale_features(ds)
    if scaling == "none":
        return ds
    raise ValueError(f"unknown scaling {scaling!r}")


def gaussian_mixture_stream(n: int, seed: int = 0, spread: float = 0.15,
                            centers: Sequence[Sequence[float]] | None = None,
                            labels: Sequence[float] | None = None):
    """Synthetic 2-D XOR-style Gaussian mixture; returns dense ``(X, y)``.

    Components are picked uniformly; labels are attached per component, so the
    two classes are not linearly separable.
    """
    if centers is None:
        centers = [(0.5, 0.5), (-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5)]
        labels = [1.0, 1.0, -1.0, -1.0]
    centers = np.asarray(centers, dtype=float)
    labels = np.asarray(labels, dtype=float)
    rng = np.random.Generator(np.random.PCG64(seed))
    comp = rng.integers(len(centers), size=n)
    X = centers[comp] + spread * rng.standard_normal((n, centers.shape[1]))
    return X, labels[comp]
