"""Experiment orchestration: training runs, delay sweeps, per-cycle evaluation,
baseline comparison and trace export.

All SOC errors are reported in fraction units; percent appears only in the
``*_pct`` columns and in traces.
"""
from __future__ import annotations

import csv
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines
from .data import (
    NOMINAL_CAPACITY_AH,
    DriveCycleLog,
    Normalizer,
    build_regressors,
    coulomb_count,
    fit_normalizer,
    normalized_channels,
    read_cycle_csv,
    split_dataset,
)
from .ecm import CellParams, NoiseSpec, generate_profile, simulate_cycle
from .errors import InsufficientHistory, LengthMismatch, NarxSocError, ValidationError
from .lm import TrainConfig, TrainHistory, lm_fit
from .metrics import MetricsReport, compute_metrics
from .narx import NarxModel, forward_closed_loop, forward_open_loop, init_model, save_model

log = logging.getLogger(__name__)

BASELINE_METHODS = ("fine-tree", "gpr-exp", "gpr-matern52", "gpr-rq")
_GPR_KIND = {"gpr-exp": "exponential", "gpr-matern52": "matern52", "gpr-rq": "rq"}


# -- data sources -----------------------------------------------------------

def load_cycle(source: str, capacity_ah=NOMINAL_CAPACITY_AH, soc0=1.0) -> DriveCycleLog:
    """Load a CSV path, or simulate ``sim:STYLE:DURATION_S:SEED[:SOC0]``."""
    if source.startswith("sim:"):
        parts = source.split(":")
        if len(parts) not in (4, 5):
            raise ValidationError(f"bad simulated source {source!r}")
        style, duration, seed = parts[1], int(parts[2]), int(parts[3])
        start = float(parts[4]) if len(parts) == 5 else soc0
        return simulate_cycle(
            CellParams(capacity_ah=capacity_ah),
            generate_profile(style, duration, seed),
            NoiseSpec(seed=seed),
            start,
            cycle_id=f"{style}-{seed}",
        )
    cycle = read_cycle_csv(source, capacity_ah=capacity_ah, soc0=soc0)
    if not cycle.has_soc:
        cycle = coulomb_count(cycle, capacity_ah, soc0)
    return cycle


def load_cycles(sources: Sequence[str], **kwargs) -> list[DriveCycleLog]:
    return [load_cycle(s, **kwargs) for s in sources]


# -- training ---------------------------------------------------------------

@dataclass
class TrainResult:
    model: NarxModel
    history: TrainHistory
    split_mse: dict[str, float]


def soc_mse(model: NarxModel, ds) -> float:
    """Open-loop MSE of `ds` in SOC fraction units."""
    norm = model.normalizer
    pred = norm.denormalize("soc", forward_open_loop(model, ds))
    true = norm.denormalize("soc", ds.targets)
    return float(np.mean((pred - true) ** 2))


def train_narx(
    cycles: Sequence[DriveCycleLog],
    hidden: int,
    delays: int,
    seed: int = 0,
    split_mode: str = "random",
    fractions=(0.70, 0.15, 0.15),
    cfg: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Fit normalization on `cycles`, build the hybrid regressor set, split, train."""
    norm = fit_normalizer(cycles)
    ds = build_regressors(cycles, delays, norm)
    train, val, test = split_dataset(ds, fractions, seed, split_mode)
    model = init_model(hidden, delays, seed, norm)
    model, history = lm_fit(model, train, val, cfg)
    mses = {name: soc_mse(model, part) for name, part in (("train", train), ("val", val), ("test", test))}
    return TrainResult(model, history, mses)


# -- sweep ------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    cycles: list[DriveCycleLog]
    delays: list[int]
    hidden: list[int] = field(default_factory=lambda: [4])
    seeds: list[int] = field(default_factory=lambda: [0])
    split_mode: str = "random"
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    train_config: TrainConfig = TrainConfig()
    eval_cycles: list[DriveCycleLog] = field(default_factory=list)
    out_dir: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.delays or not self.hidden or not self.seeds:
            raise ValidationError("need at least one delay, hidden count and seed")
        if not self.cycles:
            raise ValidationError("need at least one training cycle")


SWEEP_COLUMNS = (
    "hidden", "delay", "seed", "train_mse", "val_mse", "test_mse",
    "epochs", "stop_reason", "status",
)


def _sweep_cell(spec: ExperimentSpec, hidden: int, delay: int, seed: int) -> dict:
    row = {"hidden": hidden, "delay": delay, "seed": seed}
    try:
        res = train_narx(spec.cycles, hidden, delay, seed, spec.split_mode, spec.fractions, spec.train_config)
    except (NarxSocError, ArithmeticError) as exc:
        log.warning("sweep cell H=%d d=%d seed=%d failed: %s", hidden, delay, seed, exc)
        return {**row, "train_mse": math.nan, "val_mse": math.nan, "test_mse": math.nan,
                "epochs": 0, "stop_reason": "", "status": f"failed: {exc}"}
    if spec.out_dir is not None:
        Path(spec.out_dir).mkdir(parents=True, exist_ok=True)
        save_model(res.model, Path(spec.out_dir) / f"narx_H{hidden}_D{delay}_S{seed}.json")
    return {
        **row,
        "train_mse": res.split_mse["train"],
        "val_mse": res.split_mse["val"],
        "test_mse": res.split_mse["test"],
        "epochs": res.history.epochs,
        "stop_reason": res.history.stop_reason.value,
        "status": "ok",
    }


@dataclass
class SweepResult:
    rows: list[dict]
    summary: list[dict]
    ordering: str

    def write(self, path) -> None:
        path = Path(path)
        write_rows(path, self.rows, SWEEP_COLUMNS)
        write_rows(summary_path(path), self.summary, ("hidden", "delay", "n_ok", "median_train_mse", "median_val_mse", "median_test_mse"))


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_summary" + path.suffix)


def run_delay_sweep(spec: ExperimentSpec) -> SweepResult:
    """Train one model per (hidden, delay, seed); failed cells are kept and marked."""
    cells = [(h, d, s) for h in spec.hidden for d in spec.delays for s in spec.seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_sweep_cell, *zip(*[(spec, h, d, s) for h, d, s in cells])))
    else:
        rows = [_sweep_cell(spec, h, d, s) for h, d, s in cells]
    rows.sort(key=lambda r: (r["hidden"], r["delay"], r["seed"]))

    summary = []
    for h in spec.hidden:
        for d in spec.delays:
            ok = [r for r in rows if r["hidden"] == h and r["delay"] == d and r["status"] == "ok"]
            med = lambda k: statistics.median(r[k] for r in ok) if ok else math.nan
            summary.append({
                "hidden": h, "delay": d, "n_ok": len(ok),
                "median_train_mse": med("train_mse"),
                "median_val_mse": med("val_mse"),
                "median_test_mse": med("test_mse"),
            })
    ranked = sorted((s for s in summary if s["n_ok"]), key=lambda s: s["median_test_mse"])
    ordering = " < ".join(f"H{s['hidden']}D{s['delay']}" for s in ranked)
    return SweepResult(rows, summary, ordering)


# -- per-cycle evaluation ---------------------------------------------------

def predict_cycle(model: NarxModel, cycle: DriveCycleLog, mode: str = "open", clamp_feedback: bool = False):
    """Return (times, actual SOC, predicted SOC) in fractions for samples d..N-1."""
    d = model.delay_count
    if len(cycle) <= d:
        raise InsufficientHistory(cycle.cycle_id, len(cycle), d)
    if model.normalizer is None:
        raise ValidationError("model carries no normalizer")
    norm = model.normalizer
    z = normalized_channels(cycle, norm)
    if mode == "open":
        pred = forward_open_loop(model, build_regressors([cycle], d, norm))
    elif mode == "closed":
        pred = forward_closed_loop(model, z[:, :3], z[:d, 3], clamp_feedback=clamp_feedback)
    else:
        raise ValidationError(f"unknown loop mode {mode!r}")
    return cycle.time[d:], cycle.soc[d:], norm.denormalize("soc", pred)


EVAL_COLUMNS = (
    "model_id", "cycle_id", "loop_mode", "mse", "rmse", "mae", "r2", "mse_pct",
    "sample_count", "open_closed_ratio", "status",
)


@dataclass
class CycleEvalResult:
    rows: list[dict]
    ratios: list[dict]

    def write(self, path) -> None:
        path = Path(path)
        write_rows(path, self.rows, EVAL_COLUMNS)
        if self.ratios:
            write_rows(path.with_name(path.stem + "_ratios" + path.suffix), self.ratios,
                       ("cycle_id", "model_a", "model_b", "mse_ratio"))


def run_drive_cycle_eval(
    models: Sequence[NarxModel],
    cycles: Sequence[DriveCycleLog],
    loop_mode: str = "open",
    model_ids: Sequence[str] | None = None,
    clamp_feedback: bool = False,
) -> CycleEvalResult:
    """Score every model on every cycle, one row per (model, cycle).

    ``open_closed_ratio`` is open-loop MSE divided by closed-loop MSE on the
    same cycle; it is reported, not checked.
    """
    ids = list(model_ids) if model_ids else [m.model_id for m in models]
    if len(set(ids)) != len(ids):
        ids = [f"{mid}#{i}" for i, mid in enumerate(ids)]
    rows = []
    for mid, model in zip(ids, models):
        for cycle in cycles:
            base = {"model_id": mid, "cycle_id": cycle.cycle_id, "loop_mode": loop_mode}
            try:
                mse_by_mode = {}
                for mode in ("open", "closed"):
                    _, actual, pred = predict_cycle(model, cycle, mode, clamp_feedback)
                    report = compute_metrics(pred, actual, mid, cycle.cycle_id, mode)
                    mse_by_mode[mode] = report.mse
                    if mode == loop_mode:
                        chosen = report
            except InsufficientHistory as exc:
                rows.append({**base, "status": f"failed: {exc}"})
                continue
            closed = mse_by_mode["closed"]
            ratio = mse_by_mode["open"] / closed if closed > 0 else math.nan
            rows.append({**chosen.as_row(), "open_closed_ratio": ratio, "status": "ok"})
    ratios = []
    for cycle in cycles:
        scored = {r["model_id"]: r["mse"] for r in rows if r["cycle_id"] == cycle.cycle_id and r["status"] == "ok"}
        for a, b in combinations(ids, 2):
            if a in scored and b in scored:
                ratio = scored[a] / scored[b] if scored[b] > 0 else math.nan
                ratios.append({"cycle_id": cycle.cycle_id, "model_a": a, "model_b": b, "mse_ratio": ratio})
    return CycleEvalResult(rows, ratios)


# -- baselines --------------------------------------------------------------

BASELINE_COLUMNS = (
    "method", "rmse", "r2", "mse", "rmse_pct", "mse_pct", "mae", "sample_count", "status",
)


def instantaneous_features(cycles: Sequence[DriveCycleLog], skip: int = 0):
    """Rows (V, I, T) -> SOC for samples skip..N-1 of each cycle."""
    X = np.vstack([np.column_stack([c.voltage, c.current, c.temperature])[skip:] for c in cycles])
    y = np.concatenate([c.soc[skip:] for c in cycles])
    return X, y


def _report_row(method: str, pred, actual) -> dict:
    m = compute_metrics(pred, actual, method)
    return {
        "method": method, "rmse": m.rmse, "r2": m.r2, "mse": m.mse,
        "rmse_pct": m.rmse * 100.0, "mse_pct": m.mse_pct, "mae": m.mae,
        "sample_count": m.sample_count, "status": "ok",
    }


def run_baseline_compare(
    train_cycles: Sequence[DriveCycleLog],
    test_cycles: Sequence[DriveCycleLog],
    methods: Sequence[str] = BASELINE_METHODS,
    narx_models: Sequence[NarxModel] = (),
    seed: int = 0,
    max_train_rows: int = 2000,
    min_leaf: int = 4,
    narx_ids: Sequence[str] | None = None,
) -> list[dict]:
    """Fit memoryless baselines on (V, I, T) and score them with the NARX models
    on identical test rows (each test cycle minus its first max-delay samples)."""
    if not methods:
        raise ValidationError("need at least one baseline method")
    unknown = set(methods) - set(BASELINE_METHODS)
    if unknown:
        raise ValidationError(f"unknown baseline methods {sorted(unknown)}")
    skip = max((m.delay_count for m in narx_models), default=0)
    for c in test_cycles:
        if len(c) <= skip:
            raise InsufficientHistory(c.cycle_id, len(c), skip)
    X, y = instantaneous_features(train_cycles)
    Xt, yt = instantaneous_features(test_cycles, skip)

    rows = []
    for method in methods:
        try:
            if method == "fine-tree":
                pred = baselines.tree_predict(baselines.tree_fit(X, y, min_leaf), Xt)
            else:
                gp = baselines.gpr_fit(X, y, _GPR_KIND[method], seed=seed, max_train_rows=max_train_rows)
                pred = baselines.gpr_predict(gp, Xt)
            rows.append(_report_row(method, pred, yt))
        except (NarxSocError, ArithmeticError) as exc:
            log.warning("baseline %s failed: %s", method, exc)
            rows.append({"method": method, "status": f"failed: {exc}"})

    ids = list(narx_ids) if narx_ids else [f"narx-{m.model_id}" for m in narx_models]
    for mid, model in zip(ids, narx_models):
        preds = []
        for c in test_cycles:
            _, _, p = predict_cycle(model, c, "open")
            preds.append(p[skip - model.delay_count :])
        rows.append(_report_row(mid, np.concatenate(preds), yt))
    return rows


# -- traces and CSV helpers -------------------------------------------------

TRACE_COLUMNS = ("time_s", "actual_soc_pct", "predicted_soc_pct", "error_pct")


def export_trace(times, actual, predicted, path) -> None:
    """Write a predicted-vs-actual trace with SOC in percent; error = actual - predicted."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(actual, dtype=float) * 100.0
    p = np.asarray(predicted, dtype=float) * 100.0
    if not (t.shape == a.shape == p.shape):
        raise LengthMismatch("times, actual and predicted must have equal length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(t, a, p, a - p):
            w.writerow([repr(float(v)) for v in row])


def read_trace(path):
    """Inverse of :func:`export_trace`: (times, actual, predicted) as fractions."""
    rows = read_rows(path)
    t = np.array([float(r["time_s"]) for r in rows])
    a = np.array([float(r["actual_soc_pct"]) for r in rows]) / 100.0
    p = np.array([float(r["predicted_soc_pct"]) for r in rows]) / 100.0
    return t, a, p


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_rows(path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in columns})


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
