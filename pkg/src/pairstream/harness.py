"""Experiment harness behind ``pairstream <command> --config <path> [--key value ...]``.

Config files are flat ``key=value`` lines (``#`` starts a comment). Command-line
``--key value`` pairs override the file, and ``PAIRSTREAM_OUTPUT_DIR`` overrides
``output_dir``. Exit codes: 0 success, 2 config error, 3 certificate
violation, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import SCALINGS, gaussian_mixture_stream, k_folds, load_dataset, order_stream
from .learner import DEFAULT_GRID, MODES, RunConfig, decision_scores, grid_search, resolve_features, run
from .metrics import auc, batch_comparator, exact_variance, regret, regret_steps
from .rff import PRNG, MappedExample, sample_map

COMMANDS = ("run", "grid", "compare", "kernel-check", "variance-check")
ENV_OUTPUT = "PAIRSTREAM_OUTPUT_DIR"
TRACE_COLUMNS = ["t", "loss", "cum_regret", "auc_holdout", "kappa", "v_stratified",
                 "v_uniform", "wall_ms"]


class ConfigError(ValueError):
    pass


class CertificateViolation(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    command: str = "run"
    dataset: str | None = None
    synthetic: str = "none"
    synthetic_n: int = 2000
    output_dir: str = "out"
    stream_mode: str = "iid_shuffle"
    sort_feature: int = 1
    seeds: list = field(default_factory=lambda: [0])
    folds: int = 3
    fold_seed: int = 0
    holdout_fold: int = 0
    binarize_threshold: float | None = None
    scaling: str = "minmax_l2"
    regret: bool = False
    variance: bool = False
    comparator_lam: float = 1e-3
    timing: bool = False
    modes: list = field(default_factory=lambda: ["fpogd", "yang_fifo1", "full_pairs"])
    stream_variants: list = field(default_factory=lambda: ["iid_shuffle"])
    grid_eta: list = field(default_factory=lambda: list(DEFAULT_GRID["eta"]))
    grid_lam: list = field(default_factory=lambda: list(DEFAULT_GRID["lam"]))
    n_jobs: int = 1
    d_values: list = field(default_factory=lambda: [64, 256, 1024, 4096])
    kernel_dim: int = 20
    kernel_pairs: int = 10_000
    kernel_auc: bool = False
    checkpoint_every: int = 100
    run: RunConfig = field(default_factory=RunConfig)


# --- config parsing -------------------------------------------------------------

def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    def parse(s: str):
        return None if s.strip().lower() in ("none", "inf", "") else conv(s)
    return parse


def _list(conv):
    return lambda s: [conv(v) for v in s.split(",") if v.strip()]


def _eta_c(s: str):
    return s if s == "running_mean" else float(s)


PARSERS = {
    "command": str, "dataset": _opt(str), "synthetic": str, "synthetic_n": int,
    "output_dir": str, "stream_mode": str, "sort_feature": int, "seeds": _list(int),
    "folds": int, "fold_seed": int, "holdout_fold": int,
    "binarize_threshold": _opt(float), "scaling": str, "regret": _bool, "variance": _bool,
    "comparator_lam": float, "timing": _bool, "modes": _list(str),
    "stream_variants": _list(str), "grid_eta": _list(float), "grid_lam": _list(float),
    "n_jobs": int, "d_values": _list(int), "kernel_dim": int, "kernel_pairs": int,
    "kernel_auc": _bool, "checkpoint_every": int,
    # RunConfig
    "mode": str, "eps": float, "s_max": _opt(int), "policy": str, "reservoir_size": int,
    "eta": float, "eta_schedule": str, "lam": float, "gamma": _opt(float),
    "n_features": _opt(int), "rff_regime": str, "rff_c": float, "loss": str,
    "stratify_by_label": _bool, "eta_c": _eta_c, "map_seed": int, "buffer_seed": int,
    "stream_seed": int, "eval_every": int,
}
RUN_KEYS = {f.name for f in fields(RunConfig)}


def parse_pairs(pairs: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    exp = ExperimentConfig() if base is None else base
    run_updates, exp_updates = {}, {}
    for key, raw in pairs.items():
        if key not in PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            value = PARSERS[key](raw)
        except ValueError as err:
            raise ConfigError(f"bad value for {key}: {err}") from None
        (run_updates if key in RUN_KEYS else exp_updates)[key] = value
    return replace(exp, run=replace(exp.run, **run_updates), **exp_updates)


def read_config_file(path) -> dict[str, str]:
    pairs = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        pairs[key.strip()] = value.strip()
    return pairs


def validate(exp: ExperimentConfig) -> ExperimentConfig:
    if exp.command not in COMMANDS:
        raise ConfigError(f"unknown command {exp.command!r}")
    if not exp.seeds:
        raise ConfigError("seed list is empty")
    if exp.dataset is not None:
        if not Path(exp.dataset).is_file():
            raise ConfigError(f"dataset not found: {exp.dataset}")
    elif exp.synthetic != "gaussian_mixture" and exp.command != "kernel-check":
        raise ConfigError("set dataset=<path> or synthetic=gaussian_mixture")
    if exp.scaling not in SCALINGS:
        raise ConfigError(f"unknown scaling {exp.scaling!r}")
    if exp.stream_mode not in ("iid_shuffle", "sorted_by_feature"):
        raise ConfigError(f"unknown stream mode {exp.stream_mode!r}")
    for m in exp.modes:
        if m not in MODES:
            raise ConfigError(f"unknown mode {m!r}")
    if exp.command == "compare" and len(exp.modes) < 2:
        raise ConfigError("compare needs at least two modes")
    try:
        exp.run.resolved()
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return exp


def load_config(path=None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    pairs = read_config_file(path) if path else {}
    pairs.update(overrides or {})
    exp = parse_pairs(pairs)
    env = os.environ.get(ENV_OUTPUT)
    if env:
        exp = replace(exp, output_dir=env)
    return exp


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(_fmt_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def meta_text(exp: ExperimentConfig) -> str:
    """Resolved config in the same ``key=value`` format the loader reads."""
    lines = [f"# pairstream {__version__}", f"# prng: {PRNG}",
             f"# numpy {np.__version__}"]
    for f in fields(ExperimentConfig):
        if f.name != "run":
            lines.append(f"{f.name}={_fmt_value(getattr(exp, f.name))}")
    for f in fields(RunConfig):
        lines.append(f"{f.name}={_fmt_value(getattr(exp.run, f.name))}")
    return "\n".join(lines) + "\n"


# --- output -------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"refusing to write non-finite value {v}")
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            cells = [row.get(h) for h in header] if isinstance(row, dict) else row
            w.writerow([_cell(v) for v in cells])
    return path


# --- streams --------------------------------------------------------------------

def replicate(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, map_seed=cfg.map_seed + seed, buffer_seed=cfg.buffer_seed + seed,
                   stream_seed=cfg.stream_seed + seed)


def load_streams(exp: ExperimentConfig, cfg: RunConfig, stream_mode: str | None = None):
    """Training stream ``(X, y, ids)`` in arrival order plus holdout ``(X, y)``."""
    mode = stream_mode or exp.stream_mode
    if exp.dataset is not None:
        ds = load_dataset(exp.dataset, exp.binarize_threshold, exp.scaling)
        train, test = k_folds(ds, exp.folds, exp.fold_seed)[exp.holdout_fold]
        stream = order_stream(train, mode, seed=cfg.stream_seed, feature=exp.sort_feature)
        X, y, ids = train.to_arrays(stream)
        Xte, yte, _ = test.to_arrays()
        return X, y, ids, Xte, yte
    X, y = gaussian_mixture_stream(exp.synthetic_n, seed=cfg.stream_seed)
    Xte, yte = gaussian_mixture_stream(max(exp.synthetic_n // 3, 2), seed=cfg.stream_seed + 1_000_003)
    ids = np.arange(1, len(y) + 1)
    if mode == "sorted_by_feature":
        if not 1 <= exp.sort_feature <= X.shape[1]:
            raise ConfigError(f"sort_feature {exp.sort_feature} outside 1..{X.shape[1]}")
        order = np.lexsort((ids, X[:, exp.sort_feature - 1]))
        X, y, ids = X[order], y[order], ids[order]
    return X, y, ids, Xte, yte


def eval_steps(T: int, every: int) -> list[int]:
    every = every if every > 0 else max(1, T // 100)
    return sorted({1, T, *range(every, T, every)})


def kar_variance(v_uniform: float, n: int, s: int) -> float:
    """Variance of the mean over a uniform ``s``-subset drawn without replacement."""
    if n <= s:
        return 0.0
    return v_uniform / s * (n - s) / (n - 1)


def execute(exp: ExperimentConfig, cfg: RunConfig, X, y, ids, Xte, yte, *, fmap=None,
            w_star=None, want_regret: bool | None = None, want_variance: bool | None = None):
    """One run with its evaluation trace; returns ``(rows, summary, traj, model)``."""
    want_regret = exp.regret if want_regret is None else want_regret
    want_variance = exp.variance if want_variance is None else want_variance
    cfg = cfg.resolved()
    T = len(y)
    grid = eval_steps(T, cfg.eval_every)
    snaps = set(grid) | {t + 1 for t in grid}
    rsteps = []
    if want_regret:
        rsteps = sorted(set(regret_steps(T)) | (set(grid) - {1}))
        snaps |= set(rsteps)
    traj, model = run(X, y, cfg, fmap=fmap, snapshot_steps=snaps, ids=ids, keep_mapped=True)
    R = traj.mapped
    cum_at = {1: 0.0}
    if want_regret:
        if w_star is None:
            w_star = batch_comparator(R, y, cfg.loss, lam=exp.comparator_lam)
        tr = regret(traj.snapshots, R, y, w_star, cfg.loss, steps=rsteps)
        cum_at.update(zip(tr.t.tolist(), tr.cum_regret.tolist()))
    Rte = traj.fmap.map(Xte) if Xte is not None else None
    rows = []
    for t in grid:
        w_t = traj.snapshots[t + 1]
        row = {"t": t}
        if t >= 2:
            row["loss"] = float(traj.loss[t - 2])
            row["kappa"] = int(traj.kappa[t - 2])
        if want_regret:
            row["cum_regret"] = cum_at[t]
        if Rte is not None:
            row["auc_holdout"] = auc(Rte @ w_t, yte)
        if want_variance and t >= 2:
            z = MappedExample(R[t - 1], float(y[t - 1]), int(ids[t - 1]))
            if cfg.mode == "kar_reservoir":
                rep = exact_variance(cfg.loss, traj.snapshots[t], z, (R[:t - 1], y[:t - 1]),
                                     np.zeros(t - 1, dtype=int), t)
                row["v_uniform"] = rep.v_uniform
                row["v_estimator"] = kar_variance(rep.v_uniform, t - 1, cfg.reservoir_size)
            else:
                rep = exact_variance(cfg.loss, traj.snapshots[t], z, (R[:t - 1], y[:t - 1]),
                                     traj.partition(t), t)
                row["v_stratified"] = rep.v_stratified
                row["v_uniform"] = rep.v_uniform
                row["v_estimator"] = rep.v_stratified
        if exp.timing:
            row["wall_ms"] = float(traj.wall_ms[t - 2]) if t >= 2 else 0.0
        rows.append(row)
    summary = {"T": T, "kappa_T": traj.buffer.kappa,
               "wall_ms": float(traj.wall_ms[-1]),
               "auc_holdout": rows[-1].get("auc_holdout"),
               "cum_regret": rows[-1].get("cum_regret")}
    return rows, summary, traj, model


# --- commands -------------------------------------------------------------------

def _out(exp: ExperimentConfig) -> Path:
    out = Path(exp.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.txt").write_text(meta_text(exp))
    return out


def cmd_run(exp: ExperimentConfig) -> Path:
    out = _out(exp)
    summaries = []
    for seed in exp.seeds:
        cfg = replicate(exp.run, seed)
        X, y, ids, Xte, yte = load_streams(exp, cfg)
        rows, summary, _, _ = execute(exp, cfg, X, y, ids, Xte, yte)
        write_csv(out / f"seed_{seed}" / "trace.csv", TRACE_COLUMNS, rows)
        summaries.append({"seed": seed, **summary})
    write_csv(out / "summary.csv", ["seed", "T", "auc_holdout", "wall_ms", "kappa_T", "cum_regret"],
              summaries)
    return out


def cmd_grid(exp: ExperimentConfig) -> Path:
    if exp.dataset is None:
        raise ConfigError("grid needs a dataset")
    out = _out(exp)
    ds = load_dataset(exp.dataset, exp.binarize_threshold, exp.scaling)
    start = time.perf_counter()
    best, table = grid_search(ds, {"eta": exp.grid_eta, "lam": exp.grid_lam}, k=exp.folds,
                              seed=exp.fold_seed, base=exp.run, n_jobs=exp.n_jobs)
    wall = 1e3 * (time.perf_counter() - start)
    header = ["eta", "lam"] + [f"fold_{i + 1}" for i in range(exp.folds)] + ["mean_auc", "stderr"]
    rows = []
    for r in table:
        vals = [r["eta"], r["lam"], *r["fold_auc"], r["mean_auc"], r["stderr"]]
        rows.append([v if math.isfinite(v) else None for v in vals])
    write_csv(out / "cv_table.csv", header, rows)
    top = next(r for r in table if r["eta"] == best.eta and r["lam"] == best.lam)
    write_csv(out / "summary.csv", ["eta", "lam", "mean_auc", "stderr", "wall_ms"],
              [{"eta": best.eta, "lam": best.lam, "mean_auc": top["mean_auc"],
                "stderr": top["stderr"], "wall_ms": wall}])
    return out


def cmd_compare(exp: ExperimentConfig) -> Path:
    out = _out(exp)
    joined = []
    modes = list(exp.modes)
    for seed in exp.seeds:
        base = replicate(exp.run, seed)
        for variant in exp.stream_variants:
            X, y, ids, Xte, yte = load_streams(exp, base, variant)
            D, gamma = resolve_features(base, len(y), X.shape[1])
            fmap = sample_map(X.shape[1], D, gamma, base.map_seed)
            w_star = batch_comparator(fmap.map(X), y, base.loss, lam=exp.comparator_lam)
            per_mode = {}
            for mode in modes:
                cfg = replace(base, mode=mode)
                rows, _, traj, _ = execute(exp, cfg, X, y, ids, Xte, yte, fmap=fmap, w_star=w_star,
                                           want_regret=True, want_variance=True)
                if not np.array_equal(traj.ids, ids):
                    raise RuntimeError("modes saw different example orders")
                write_csv(out / f"seed_{seed}" / f"trace_{variant}_{mode}.csv", TRACE_COLUMNS, rows)
                per_mode[mode] = rows
            for k, row in enumerate(per_mode[modes[0]]):
                rec = {"seed": seed, "variant": variant, "t": row["t"]}
                for mode in modes:
                    rec[f"cum_regret_{mode}"] = per_mode[mode][k].get("cum_regret")
                    rec[f"v_{mode}"] = per_mode[mode][k].get("v_estimator")
                    rec[f"auc_{mode}"] = per_mode[mode][k].get("auc_holdout")
                joined.append(rec)
    header = ["seed", "variant", "t"] + [f"{c}_{m}" for m in modes for c in ("cum_regret", "v", "auc")]
    write_csv(out / "compare.csv", header, joined)
    return out


def kernel_errors(D: int, d: int, n_pairs: int, gamma: float, seed: int):
    """``|approx - exact|`` pairwise-kernel errors on random unit-norm quadruples."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = rng.standard_normal((4, n_pairs, d))
    pts /= np.linalg.norm(pts, axis=2, keepdims=True)
    x1, x2, x1p, x2p = pts
    fmap = sample_map(d, D, gamma, seed)
    approx = ((fmap.map(x1) - fmap.map(x2)) * (fmap.map(x1p) - fmap.map(x2p))).sum(axis=1)

    def G(a, b):
        return np.exp(-gamma * ((a - b) ** 2).sum(axis=1))

    exact = G(x1, x1p) + G(x2, x2p) - G(x1, x2p) - G(x2, x1p)
    return np.abs(approx - exact)


def cmd_kernel_check(exp: ExperimentConfig) -> Path:
    out = _out(exp)
    d = exp.kernel_dim
    gamma = exp.run.gamma if exp.run.gamma is not None else 1.0 / d
    rows = []
    for D in exp.d_values:
        err = kernel_errors(D, d, exp.kernel_pairs, gamma, exp.run.map_seed)
        row = {"D": D, "median_err": float(np.median(err)),
               "p95_err": float(np.percentile(err, 95))}
        if exp.kernel_auc and (exp.dataset is not None or exp.synthetic == "gaussian_mixture"):
            cfg = replace(exp.run, n_features=D)
            X, y, ids, Xte, yte = load_streams(exp, cfg)
            traj, model = run(X, y, cfg, ids=ids)
            row["auc"] = auc(decision_scores(model, traj.fmap, Xte), yte)
        rows.append(row)
    write_csv(out / "kernel_check.csv", ["D", "median_err", "p95_err", "auc"], rows)
    return out


def cmd_variance_check(exp: ExperimentConfig) -> Path:
    out = _out(exp)
    cfg = exp.run.resolved()
    if cfg.mode == "kar_reservoir":
        raise ConfigError("variance-check needs a strata-based mode")
    header = ["seed", "t", "kappa", "v_stratified", "v_uniform", "certificate_ok"]
    rows, bad = [], []
    for seed in exp.seeds:
        c = replicate(cfg, seed)
        X, y, ids, _, _ = load_streams(exp, c)
        T = len(y)
        checkpoints = [t for t in range(exp.checkpoint_every, T + 1, exp.checkpoint_every) if t >= 2]
        traj, _ = run(X, y, c, snapshot_steps=checkpoints, ids=ids, keep_mapped=True)
        R = traj.mapped
        for t in checkpoints:
            z = MappedExample(R[t - 1], float(y[t - 1]), int(ids[t - 1]))
            rep = exact_variance(c.loss, traj.snapshots[t], z, (R[:t - 1], y[:t - 1]),
                                 traj.partition(t), t)
            row = {"seed": seed, "t": t, "kappa": rep.kappa, "v_stratified": rep.v_stratified,
                   "v_uniform": rep.v_uniform, "certificate_ok": rep.certificate_ok}
            rows.append(row)
            if not rep.certificate_ok:
                bad.append(row)
    write_csv(out / "variance.csv", header, rows)
    if bad:
        raise CertificateViolation(f"variance certificate failed: {bad[0]}")
    return out


DISPATCH = {"run": cmd_run, "grid": cmd_grid, "compare": cmd_compare,
            "kernel-check": cmd_kernel_check, "variance-check": cmd_variance_check}


def _overrides(extra: list[str]) -> dict[str, str]:
    pairs = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        pairs[key.replace("-", "_")] = value
    return pairs


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pairstream", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value config file")
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        overrides = _overrides(extra)
        overrides["command"] = args.command
        exp = validate(load_config(args.config, overrides))
        out = DISPATCH[args.command](exp)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except CertificateViolation as err:
        print(str(err), file=sys.stderr)
        return 3
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
