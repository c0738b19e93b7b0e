"""Multi-source tabular data: schema, CSV ingestion, scaling and seeded splits.

A dataset holds numeric inputs ``X`` (n x m), integer level codes for every
categorical variable (n x q', the source column last) and the response ``y``.
Level codes index into the schema's level registry, so the registry order is
the order used for latent anchoring downstream.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyDatasetError, ParseError, SchemaError, UnknownLevelError


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox 4x64) used for every seeded draw."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class VariableSchema:
    numeric_inputs: tuple[str, ...]
    categorical_inputs: tuple[str, ...] = ()
    source_column: str | None = None
    response_column: str = "y"
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "numeric_inputs", tuple(self.numeric_inputs))
        object.__setattr__(self, "categorical_inputs", tuple(self.categorical_inputs))
        levels = {name: tuple(str(v) for v in self.levels.get(name, ())) for name in self.categorical}
        extra = set(self.levels) - set(levels)
        if extra:
            raise SchemaError(f"levels declared for non-categorical columns: {sorted(extra)}")
        object.__setattr__(self, "levels", levels)
        names = self.columns
        if len(set(names)) != len(names):
            raise SchemaError(f"column names must be disjoint, got {names}")
        for name, lv in levels.items():
            if len(set(lv)) != len(lv):
                raise SchemaError(f"duplicate levels declared for {name!r}")

    @property
    def categorical(self) -> tuple[str, ...]:
        """Categorical variables in latent order; the source column comes last."""
        if self.source_column is None:
            return self.categorical_inputs
        return self.categorical_inputs + (self.source_column,)

    @property
    def columns(self) -> tuple[str, ...]:
        return self.numeric_inputs + self.categorical + (self.response_column,)

    def level_index(self, variable: str, level: str) -> int:
        try:
            return self.levels[variable].index(str(level))
        except KeyError:
            raise SchemaError(f"{variable!r} is not a categorical variable") from None
        except ValueError:
            raise UnknownLevelError(variable, str(level)) from None

    def with_levels(self, variable: str, levels: Sequence[str]) -> "VariableSchema":
        new = dict(self.levels)
        new[variable] = tuple(levels)
        return replace(self, levels=new)

    def to_dict(self) -> dict:
        return {
            "numeric_inputs": list(self.numeric_inputs),
            "categorical_inputs": list(self.categorical_inputs),
            "source_column": self.source_column,
            "response_column": self.response_column,
            "levels": {k: list(v) for k, v in self.levels.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "VariableSchema":
        return cls(
            numeric_inputs=tuple(d["numeric_inputs"]),
            categorical_inputs=tuple(d.get("categorical_inputs", ())),
            source_column=d.get("source_column"),
            response_column=d["response_column"],
            levels={k: tuple(v) for k, v in d.get("levels", {}).items()},
        )


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def read_schema(path: str | Path) -> VariableSchema:
    """Parse a ``key = value`` schema file.

    Recognized keys: ``numeric_inputs``, ``categorical_inputs`` (comma lists),
    ``source_column``, ``response_column`` and optional ``levels.<column>``
    lists pre-declaring level order.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    parser.read_string("[schema]\n" + text)
    sec = parser["schema"]
    if "response_column" not in sec:
        raise SchemaError("schema file must define response_column")
    levels = {k[len("levels."):]: _split_list(v) for k, v in sec.items() if k.startswith("levels.")}
    source = sec.get("source_column", "").strip() or None
    return VariableSchema(
        numeric_inputs=_split_list(sec.get("numeric_inputs", "")),
        categorical_inputs=_split_list(sec.get("categorical_inputs", "")),
        source_column=source,
        response_column=sec["response_column"].strip(),
        levels=levels,
    )


def write_schema(schema: VariableSchema, path: str | Path) -> None:
    lines = [
        f"numeric_inputs = {', '.join(schema.numeric_inputs)}",
        f"categorical_inputs = {', '.join(schema.categorical_inputs)}",
        f"source_column = {schema.source_column or ''}",
        f"response_column = {schema.response_column}",
    ]
    lines += [f"levels.{name} = {', '.join(lv)}" for name, lv in schema.levels.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class MultiSourceDataset:
    schema: VariableSchema
    X: np.ndarray
    codes: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(len(self.y), len(self.schema.numeric_inputs))
        codes = np.asarray(self.codes, dtype=np.int64).reshape(len(self.y), len(self.schema.categorical))
        y = np.asarray(self.y, dtype=float).ravel()
        for j, name in enumerate(self.schema.categorical):
            n_levels = len(self.schema.levels[name])
            if codes.size and (codes[:, j].min() < 0 or codes[:, j].max() >= n_levels):
                raise SchemaError(f"level codes out of range for {name!r}")
        for arr in (X, codes, y):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.y)

    def __len__(self) -> int:
        return self.n

    @property
    def source_codes(self) -> np.ndarray:
        if self.schema.source_column is None:
            return np.zeros(self.n, dtype=np.int64)
        return self.codes[:, -1]

    @property
    def sources(self) -> tuple[str, ...]:
        if self.schema.source_column is None:
            return ()
        return self.schema.levels[self.schema.source_column]

    def level_labels(self, variable: str) -> list[str]:
        j = self.schema.categorical.index(variable)
        lv = self.schema.levels[variable]
        return [lv[c] for c in self.codes[:, j]]

    def source_counts(self) -> dict[str, int]:
        counts = np.bincount(self.source_codes, minlength=len(self.sources))
        return {s: int(c) for s, c in zip(self.sources, counts)}

    def subset(self, idx: Iterable[int] | np.ndarray) -> "MultiSourceDataset":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        idx = idx.astype(np.int64)
        return MultiSourceDataset(self.schema, self.X[idx], self.codes[idx], self.y[idx])

    def rows_of_source(self, source: str) -> np.ndarray:
        if self.schema.source_column is None:
            raise SchemaError("dataset has no source column")
        code = self.schema.level_index(self.schema.source_column, source)
        return np.flatnonzero(self.source_codes == code)

    def compact(self) -> "MultiSourceDataset":
        """Drop registry levels that no row uses, keeping the remaining order."""
        schema = self.schema
        codes = self.codes.copy()
        for j, name in enumerate(schema.categorical):
            used = np.unique(codes[:, j])
            remap = np.full(len(schema.levels[name]), -1, dtype=np.int64)
            remap[used] = np.arange(len(used))
            codes[:, j] = remap[codes[:, j]]
            schema = schema.with_levels(name, [schema.levels[name][u] for u in used])
        return MultiSourceDataset(schema, self.X, codes, self.y)

    def to_csv(self, path: str | Path) -> None:
        schema = self.schema
        labels = [self.level_labels(name) for name in schema.categorical]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(schema.columns)
            for i in range(self.n):
                w.writerow(
                    [repr(float(v)) for v in self.X[i]]
                    + [lab[i] for lab in labels]
                    + [repr(float(self.y[i]))]
                )


def from_records(schema: VariableSchema, records: Sequence[Mapping]) -> MultiSourceDataset:
    """Build a dataset from dict-like rows, auto-registering unseen levels."""
    if not records:
        raise EmptyDatasetError("dataset has no rows")
    levels = {name: list(schema.levels[name]) for name in schema.categorical}
    n, m, q = len(records), len(schema.numeric_inputs), len(schema.categorical)
    X = np.empty((n, m))
    codes = np.empty((n, q), dtype=np.int64)
    y = np.empty(n)
    for i, rec in enumerate(records):
        for j, name in enumerate(schema.numeric_inputs):
            X[i, j] = _parse_float(rec[name], i, name)
        for j, name in enumerate(schema.categorical):
            lab = str(rec[name]).strip()
            if lab == "":
                raise ParseError(i, name, lab)
            if lab not in levels[name]:
                levels[name].append(lab)
            codes[i, j] = levels[name].index(lab)
        y[i] = _parse_float(rec[schema.response_column], i, schema.response_column)
    schema = replace(schema, levels={k: tuple(v) for k, v in levels.items()})
    return MultiSourceDataset(schema, X, codes, y)


def _parse_float(value, row: int, column: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParseError(row, column, str(value)) from None
    if not math.isfinite(v):
        raise ParseError(row, column, str(value))
    return v


def load_csv(path: str | Path, schema: VariableSchema) -> MultiSourceDataset:
    """Read a headed CSV in file order; rows are 0-indexed in error messages."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyDatasetError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        records = list(reader)
    if not records:
        raise EmptyDatasetError(f"{path}: no data rows")
    return from_records(schema, records)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Train-set affine maps: numerics to [0, 1], response to zero mean / unit std."""

    x_min: np.ndarray
    x_max: np.ndarray
    y_mean: float
    y_std: float
    constant_response: bool = False

    def transform_X(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = self.x_max - self.x_min
        flat = span == 0
        out = (X - self.x_min) / np.where(flat, 1.0, span)
        return np.where(flat, 0.5, out)

    def inverse_X(self, Xs: np.ndarray) -> np.ndarray:
        Xs = np.asarray(Xs, dtype=float)
        span = self.x_max - self.x_min
        return np.where(span == 0, self.x_min, self.x_min + Xs * span)

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def inverse_y(self, ys: np.ndarray) -> np.ndarray:
        return np.asarray(ys, dtype=float) * self.y_std + self.y_mean

    def inverse_var(self, var: np.ndarray) -> np.ndarray:
        return np.asarray(var, dtype=float) * self.y_std**2

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "constant_response": self.constant_response,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Standardizer":
        return cls(
            np.asarray(d["x_min"], dtype=float),
            np.asarray(d["x_max"], dtype=float),
            float(d["y_mean"]),
            float(d["y_std"]),
            bool(d.get("constant_response", False)),
        )


def fit_standardizer(train: MultiSourceDataset) -> Standardizer:
    if train.n < 2:
        raise EmptyDatasetError("standardization needs at least 2 rows")
    std = float(np.std(train.y))  # population convention
    constant = not std > 0
    return Standardizer(
        x_min=train.X.min(axis=0),
        x_max=train.X.max(axis=0),
        y_mean=float(np.mean(train.y)),
        y_std=1.0 if constant else std,
        constant_response=constant,
    )


def standardize(train: MultiSourceDataset) -> tuple[MultiSourceDataset, Standardizer]:
    scaler = fit_standardizer(train)
    scaled = MultiSourceDataset(
        train.schema, scaler.transform_X(train.X), train.codes, scaler.transform_y(train.y)
    )
    return scaled, scaler


def fold_assignment(data: MultiSourceDataset, k: int, seed: int) -> np.ndarray:
    """Fold id per row: per-source seeded shuffle, then one round-robin deal.

    The deal position carries over from one source to the next so total fold
    sizes differ by at most one as well.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > data.n:
        raise ValueError(f"k={k} exceeds the number of rows ({data.n})")
    rng = make_rng(seed)
    folds = np.empty(data.n, dtype=np.int64)
    src = data.source_codes
    pos = 0
    for code in range(max(len(data.sources), 1)):
        rows = np.flatnonzero(src == code)
        rows = rows[rng.permutation(len(rows))]
        folds[rows] = (pos + np.arange(len(rows))) % k
        pos = (pos + len(rows)) % k
    return folds


def stratified_kfold(
    data: MultiSourceDataset, k: int, seed: int
) -> list[tuple[MultiSourceDataset, MultiSourceDataset]]:
    folds = fold_assignment(data, k, seed)
    return [(data.subset(folds != f), data.subset(folds == f)) for f in range(k)]


def holdout_from_source(
    data: MultiSourceDataset, source: str, n_test: int, seed: int
) -> tuple[MultiSourceDataset, MultiSourceDataset]:
    """Move ``n_test`` randomly chosen rows of one source into a test set.

    Both outputs keep the original row order and the full level registry.
    """
    rows = data.rows_of_source(source)
    if not 0 <= n_test <= len(rows):
        raise ValueError(f"n_test={n_test} but source {source!r} has {len(rows)} rows")
    picked = np.sort(make_rng(seed).choice(rows, size=n_test, replace=False))
    mask = np.zeros(data.n, dtype=bool)
    mask[picked] = True
    return data.subset(~mask), data.subset(mask)
