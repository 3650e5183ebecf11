"""Fourier pairwise online gradient descent and the buffer baselines built from it."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

import numpy as np

from .losses import buffer_loss_grad, regularized_direction
from .rff import FourierMap, MappedExample, rff_count, sample_map
from .strata import InvariantError, ReservoirBuffer, StrataBuffer

MODES = ("fpogd", "yang_fifo1", "kar_reservoir", "full_pairs")
NORM_TRIPWIRE = 1e3


@dataclass
class Model:
    w: np.ndarray
    eta: float
    lam: float = 0.0
    t: int = 1


@dataclass
class RunConfig:
    mode: str = "fpogd"
    eps: float = 0.01
    s_max: int | None = 16
    policy: str = "fifo"
    reservoir_size: int = 4
    eta: float = 0.125
    eta_schedule: str = "constant"
    lam: float = 1e-4
    gamma: float | None = None
    n_features: int | None = None
    rff_regime: str = "default"
    rff_c: float = 1.0
    loss: str = "squared_auc"
    stratify_by_label: bool = True
    eta_c: float | str = 0.1
    map_seed: int = 0
    buffer_seed: int = 0
    stream_seed: int = 0
    eval_every: int = 0

    def resolved(self) -> "RunConfig":
        """Apply the baseline presets that pin down the buffer configuration."""
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.eta_schedule not in ("constant", "inv_sqrt_T"):
            raise ValueError(f"unknown step-size schedule {self.eta_schedule!r}")
        if self.mode == "yang_fifo1":
            return replace(self, eps=math.inf, s_max=None, policy="fifo")
        if self.mode == "full_pairs":
            return replace(self, eps=0.0, s_max=None, policy="fifo")
        return replace(self)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class StepRecord:
    t: int
    loss: float
    kappa: int


@dataclass
class Trajectory:
    t: np.ndarray
    loss: np.ndarray
    kappa: np.ndarray
    wall_ms: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    fmap: FourierMap | None = None
    buffer: StrataBuffer | ReservoirBuffer | None = None
    mapped: np.ndarray | None = None
    labels: np.ndarray | None = None
    config: RunConfig | None = None
    ids: np.ndarray | None = None

    def partition(self, t: int) -> np.ndarray:
        """Stratum index of each of the first ``t - 1`` examples, as seen at step ``t``."""
        return np.asarray(self.buffer.assignments[:t - 1])


def make_buffer(cfg: RunConfig):
    cfg = cfg.resolved()
    if cfg.mode == "kar_reservoir":
        return ReservoirBuffer(cfg.reservoir_size, seed=cfg.buffer_seed)
    return StrataBuffer(cfg.eps, s_max=cfg.s_max, policy=cfg.policy, eta_c=cfg.eta_c,
                        stratify_by_label=cfg.stratify_by_label, seed=cfg.buffer_seed)


def _step(model: Model, buffer, z: MappedExample, t: int, kind: str):
    loss, g = buffer_loss_grad(kind, model.w, z, buffer, t)
    v = regularized_direction(g, model.w, model.lam)
    new = replace(model, w=model.w - model.eta * v, t=t)
    kappa = buffer.kappa
    buffer.update(z)
    return new, StepRecord(t, loss, kappa)


def fpogd_step(model: Model, buffer, fmap: FourierMap, x, y: float, t: int,
               kind: str = "squared_auc", id: int = 0):
    """Map ``(x, y)``, take one gradient step on the weighted buffer loss, then refresh the buffer.

    The returned record carries the loss suffered by the pre-update model.
    """
    if t < 2:
        raise ValueError("steps start at t = 2")
    z = MappedExample(fmap.map(x), float(y), id)
    return _step(model, buffer, z, t, kind)


def resolve_features(cfg: RunConfig, T: int, d: int) -> tuple[int, float]:
    D = cfg.n_features if cfg.n_features is not None else rff_count(T, cfg.rff_regime, cfg.rff_c)
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / d
    return D, gamma


def step_size(cfg: RunConfig, T: int) -> float:
    return 1.0 / math.sqrt(T) if cfg.eta_schedule == "inv_sqrt_T" else cfg.eta


def run(X, y, cfg: RunConfig, *, fmap: FourierMap | None = None,
        snapshot_steps: Iterable[int] = (), ids=None, keep_mapped: bool = False):
    """Process the stream ``(X[0], y[0]), ...`` in order.

    ``snapshot_steps`` lists steps ``t`` at which ``w_{t-1}`` is kept (the model
    that suffers the loss at step ``t``); step ``T + 1`` gives the final model.
    """
    cfg = cfg.resolved()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    T = len(y)
    if T < 2:
        raise ValueError("stream must hold at least two examples")
    if fmap is None:
        D, gamma = resolve_features(cfg, T, X.shape[1])
        fmap = sample_map(X.shape[1], D, gamma, cfg.map_seed)
    ids = np.arange(1, T + 1) if ids is None else np.asarray(ids)
    R = fmap.map(X)
    zs = [MappedExample(R[i], float(y[i]), int(ids[i])) for i in range(T)]

    buffer = make_buffer(cfg)
    buffer.initialize(zs[0])
    model = Model(np.zeros(fmap.n_features), step_size(cfg, T), cfg.lam, 1)
    want = set(snapshot_steps)
    snaps = {}
    loss = np.empty(T - 1)
    kappa = np.empty(T - 1, dtype=np.int64)
    wall = np.empty(T - 1)
    start = time.perf_counter()
    # divergence is caught by the norm tripwire below
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(2, T + 1):
            if t in want:
                snaps[t] = model.w.copy()
            model, rec = _step(model, buffer, zs[t - 1], t, cfg.loss)
            cap = t - 1 if getattr(buffer, "s_max", None) is None else min(t - 1, buffer.s_max)
            if rec.kappa > cap:
                raise InvariantError(f"kappa {rec.kappa} exceeds {cap} at t={t}")
            loss[t - 2] = rec.loss
            kappa[t - 2] = rec.kappa
            wall[t - 2] = 1e3 * (time.perf_counter() - start)
    if not np.all(np.isfinite(model.w)) or np.linalg.norm(model.w) > NORM_TRIPWIRE:
        raise FloatingPointError(f"model norm blew up: {np.linalg.norm(model.w)}")
    if T + 1 in want:
        snaps[T + 1] = model.w.copy()
    traj = Trajectory(np.arange(2, T + 1), loss, kappa, wall, snaps, fmap, buffer,
                      R if keep_mapped else None, y if keep_mapped else None, cfg, ids)
    return traj, model


def decision_scores(model: Model | np.ndarray, fmap: FourierMap, X) -> np.ndarray:
    w = model.w if isinstance(model, Model) else model
    return fmap.map(np.asarray(X, dtype=float)) @ w


DEFAULT_GRID = {"eta": [2.0 ** -k for k in range(8, 0, -1)],
                "lam": [10.0 ** -k for k in range(8, 0, -1)]}


def _cv_cell(folds, cfg: RunConfig):
    from .dataio import order_stream
    from .metrics import auc

    scores = []
    for train, test in folds:
        stream = order_stream(train, "iid_shuffle", seed=cfg.stream_seed)
        Xtr, ytr, idtr = train.to_arrays(stream)
        try:
            traj, model = run(Xtr, ytr, cfg, ids=idtr)
        except FloatingPointError:
            scores.append(math.nan)
            continue
        Xte, yte, _ = test.to_arrays()
        scores.append(auc(decision_scores(model, traj.fmap, Xte), yte))
    return scores


def grid_search(dataset, grids: dict | None = None, k: int = 3, seed: int = 0,
                base: RunConfig | None = None, n_jobs: int = 1):
    """k-fold CV over the ``eta`` x ``lam`` grid; returns ``(best config, table)``.

    Each table row holds the cell's hyperparameters, per-fold test AUCs, their
    mean and standard error. Cells whose model diverges score NaN and are never
    selected. Ties go to the smaller ``lam``, then smaller ``eta``.
    """
    from .dataio import k_folds

    grids = dict(DEFAULT_GRID if grids is None else grids)
    if not grids.get("eta") or not grids.get("lam"):
        raise ValueError("grids must list at least one eta and one lam")
    base = RunConfig() if base is None else base
    folds = k_folds(dataset, k, seed)
    cells = [replace(base, eta=eta, lam=lam, eta_schedule="constant")
             for eta, lam in itertools.product(grids["eta"], grids["lam"])]
    if n_jobs == 1:
        results = [_cv_cell(folds, c) for c in cells]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_cv_cell)(folds, c) for c in cells)
    table = []
    for c, fold_aucs in zip(cells, results):
        a = np.array(fold_aucs)
        table.append({"eta": c.eta, "lam": c.lam, "fold_auc": fold_aucs, "mean_auc": float(a.mean()),
                      "stderr": float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0})
    def rank(i):
        m = table[i]["mean_auc"]
        return (-m if math.isfinite(m) else math.inf, cells[i].lam, cells[i].eta)

    best = min(range(len(cells)), key=rank)
    return cells[best], table
