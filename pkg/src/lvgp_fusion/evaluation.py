"""Scoring, cross-validation and plot-ready CSV exports."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import MultiSourceDataset, fold_assignment
from .errors import LVGPError, SchemaError
from .gp import FitOptions, GPModel, fit_gp, predict
from .lvgp import LVGPModel, fit_lvgp, predict_dataset, predict_lvgp


def nrmse(truth, pred) -> float:
    """RMSE divided by the range of the true values."""
    truth = np.asarray(truth, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if truth.shape != pred.shape or truth.size == 0:
        raise ValueError("truth and pred must have equal, nonzero length")
    span = truth.max() - truth.min()
    if not span > 0:
        raise ValueError("NRMSE is undefined when the true values have zero range")
    return float(np.sqrt(np.mean((truth - pred) ** 2)) / span)


def _nrmse_or_nan(truth, pred) -> float:
    try:
        return nrmse(truth, pred)
    except ValueError:
        return math.nan


@dataclass(frozen=True, eq=False)
class EvalReport:
    split: str
    nrmse: float
    truth: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    sources: tuple[str, ...] = ()
    fold_train_nrmse: tuple[float, ...] = ()
    fold_cv_nrmse: tuple[float, ...] = ()

    @property
    def mean_train_nrmse(self) -> float:
        return _nanmean(self.fold_train_nrmse)

    @property
    def mean_cv_nrmse(self) -> float:
        return _nanmean(self.fold_cv_nrmse)


def _nanmean(values: Sequence[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def fit_model(data: MultiSourceDataset, kind: str, opts: FitOptions | None = None) -> GPModel:
    if kind == "gp":
        return fit_gp(data, opts)
    if kind == "lvgp":
        return fit_lvgp(data, opts)
    raise ValueError(f"unknown model kind {kind!r}")


def evaluate(model: GPModel, data: MultiSourceDataset, split: str = "test") -> EvalReport:
    mean, var = predict_dataset(model, data)
    sources = tuple(data.level_labels(data.schema.source_column)) if data.schema.source_column else ()
    return EvalReport(split, nrmse(data.y, mean), data.y.copy(), mean, np.sqrt(var), sources)


class FoldError(LVGPError):
    def __init__(self, fold: int, cause: Exception):
        self.fold = fold
        super().__init__(f"fold {fold}: {cause}")


def run_cv(
    data: MultiSourceDataset, kind: str, k: int = 5, seed: int = 0, opts: FitOptions | None = None
) -> EvalReport:
    """Stratified k-fold CV.

    Training NRMSE is scored per fold on that fold's own training rows and
    averaged. Parity records hold the out-of-fold predictions in row order.
    A fold whose validation truth has zero range (e.g. a single row) gets a
    NaN fold score and is skipped by the means; the report's ``nrmse`` is
    the pooled out-of-fold value.
    """
    opts = opts or FitOptions(seed=seed)
    folds = fold_assignment(data, k, seed)
    mean = np.empty(data.n)
    std = np.empty(data.n)
    train_scores, cv_scores = [], []
    for f in range(k):
        train, val = data.subset(folds != f), data.subset(folds == f)
        try:
            model = fit_model(train, kind, opts)
            m_tr, _ = predict_dataset(model, train)
            m_va, v_va = predict_dataset(model, val)
        except (LVGPError, ValueError) as exc:
            if isinstance(exc, FoldError):
                raise
            raise FoldError(f, exc) from exc
        train_scores.append(_nrmse_or_nan(train.y, m_tr))
        cv_scores.append(_nrmse_or_nan(val.y, m_va))
        mean[folds == f] = m_va
        std[folds == f] = np.sqrt(v_va)
    sources = tuple(data.level_labels(data.schema.source_column)) if data.schema.source_column else ()
    return EvalReport(
        "cv", _nrmse_or_nan(data.y, mean), data.y.copy(), mean, std, sources,
        tuple(train_scores), tuple(cv_scores),
    )


def parity_export(report: EvalReport, path: str | Path) -> Path:
    """Write ``split,truth,mean,std`` rows (floats in round-trip repr)."""
    if len(report.truth) == 0:
        raise ValueError("report is empty")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "truth", "mean", "std"])
        for t, m, s in zip(report.truth, report.mean, report.std):
            w.writerow([report.split, repr(float(t)), repr(float(m)), repr(float(s))])
    return path


def cv_report_export(report: EvalReport, path: str | Path) -> Path:
    """Per-fold scores plus the means; training NRMSE is the per-fold average."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "train_nrmse", "cv_nrmse"])
        for i, (a, b) in enumerate(zip(report.fold_train_nrmse, report.fold_cv_nrmse)):
            w.writerow([i, repr(a), repr(b)])
        w.writerow(["mean", repr(report.mean_train_nrmse), repr(report.mean_cv_nrmse)])
        w.writerow(["pooled", "", repr(report.nrmse)])
    return path


@dataclass(frozen=True)
class Sweep:
    variable: str
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class SurfaceSpec:
    """One or two swept numeric inputs, everything else held fixed."""

    sweeps: tuple[Sweep, ...]
    fixed: Mapping[str, float] = field(default_factory=dict)
    levels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sweeps", tuple(self.sweeps))
        if not 1 <= len(self.sweeps) <= 2:
            raise ValueError("a surface sweeps one or two variables")
        names = [s.variable for s in self.sweeps]
        if len(set(names)) != len(names):
            raise ValueError("swept variables must be distinct")
        for s in self.sweeps:
            if s.steps < 2:
                raise ValueError(f"{s.variable!r}: steps must be at least 2")


def read_surface_spec(path: str | Path) -> SurfaceSpec:
    """Parse ``sweep = name:lo:hi:steps[, name:lo:hi:steps]`` plus
    ``fixed.<numeric> = value`` and ``level.<categorical> = level`` lines."""
    sweeps, fixed, levels = [], {}, {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"cannot parse surface spec line {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "sweep":
            for part in value.split(","):
                name, lo, hi, steps = (s.strip() for s in part.split(":"))
                sweeps.append(Sweep(name, float(lo), float(hi), int(steps)))
        elif key.startswith("fixed."):
            fixed[key[6:]] = float(value)
        elif key.startswith("level."):
            levels[key[6:]] = value
        else:
            raise SchemaError(f"unknown surface spec key {key!r}")
    return SurfaceSpec(tuple(sweeps), fixed, levels)


def surface_grid(model: GPModel, spec: SurfaceSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Swept coordinates (rows, n_sweeps), predictive mean and std on the grid."""
    names = model.schema.numeric_inputs
    for s in spec.sweeps:
        if s.variable not in names:
            raise SchemaError(f"{s.variable!r} is not a numeric input of the model")
    swept = {s.variable for s in spec.sweeps}
    missing = [n for n in names if n not in swept and n not in spec.fixed]
    if missing:
        raise SchemaError(f"no fixed value for numeric input(s) {missing}")
    axes = np.meshgrid(*[s.values() for s in spec.sweeps], indexing="ij")
    grid = np.stack([a.ravel() for a in axes], axis=1)
    X = np.empty((len(grid), len(names)))
    for j, name in enumerate(names):
        if name in swept:
            X[:, j] = grid[:, [s.variable for s in spec.sweeps].index(name)]
        else:
            X[:, j] = spec.fixed[name]
    if isinstance(model, LVGPModel):
        mean, var = predict_lvgp(model, X, dict(spec.levels))
    else:
        mean, var = predict(model, X)
    return grid, mean, np.sqrt(var)


def surface_export(model: GPModel, spec: SurfaceSpec, path: str | Path) -> Path:
    grid, mean, std = surface_grid(model, spec)
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([s.variable for s in spec.sweeps] + ["mean", "std"])
        for g, m, s in zip(grid, mean, std):
            w.writerow([repr(float(v)) for v in g] + [repr(float(m)), repr(float(s))])
    return path
