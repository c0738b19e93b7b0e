"""Synthetic multi-source families: shifted parabolas and 2-D Ackley variants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import MultiSourceDataset, VariableSchema, make_rng, write_schema
from .errors import UnknownLevelError

SOURCES = ("ground", "p1", "p2", "p3")


@dataclass(frozen=True)
class ParabolaParams:
    a: float = 1.0
    b: float = 2.0
    x_shift: float = 0.0
    y_shift: float = 0.0


PARABOLA_SOURCES: dict[str, ParabolaParams] = {
    "ground": ParabolaParams(),
    "p1": ParabolaParams(x_shift=8.0),
    "p2": ParabolaParams(y_shift=100.0),
    "p3": ParabolaParams(x_shift=12.0, y_shift=120.0),
}
PARABOLA_TRAIN = {"ground": 3, "p1": 10, "p2": 10, "p3": 10}
PARABOLA_TEST = {s: 30 for s in SOURCES}
PARABOLA_DOMAIN = (-10.0, 10.0)


@dataclass(frozen=True)
class AckleyParams:
    a: float = 20.0
    b: float = 0.2
    c: float = 2.0


ACKLEY_TRAIN = {"ground": 20, "p1": 50, "p2": 50, "p3": 50}
ACKLEY_TEST = {s: 100 for s in SOURCES}
ACKLEY_DOMAIN = (-5.0, 5.0)


def _check_source(source: str, known) -> None:
    if source not in known:
        raise UnknownLevelError("source", source)


def parabola_value(source: str, x):
    _check_source(source, PARABOLA_SOURCES)
    p = PARABOLA_SOURCES[source]
    x = np.asarray(x, dtype=float)
    return (x + p.x_shift - p.a) * (x + p.x_shift - p.b) + p.y_shift


def ackley_value(source: str, x, y, params: AckleyParams = AckleyParams()):
    # standard radicand x^2 + y^2 and cos(c*y) in the cosine term for every source
    _check_source(source, SOURCES)
    a, b, c = params.a, params.b, params.c
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    radial = -a * np.exp(-b * np.sqrt(0.5 * (x**2 + y**2)))
    wave = np.exp(0.5 * (np.cos(c * x) + np.cos(c * y)))
    if source == "ground":
        return radial - wave + a + math.e
    if source == "p1":
        return radial + 10.0
    if source == "p2":
        return wave + 5.0
    return 0.25 * radial - 0.75 * wave + a + math.e


def _schema(numeric: tuple[str, ...], response: str) -> VariableSchema:
    return VariableSchema(numeric, (), "source", response, {"source": SOURCES})


def _assemble(schema: VariableSchema, blocks: list[tuple[str, np.ndarray, np.ndarray]]) -> MultiSourceDataset:
    X = np.concatenate([b[1] for b in blocks]).reshape(-1, len(schema.numeric_inputs))
    y = np.concatenate([b[2] for b in blocks])
    codes = np.concatenate([np.full(len(b[2]), SOURCES.index(b[0])) for b in blocks])
    return MultiSourceDataset(schema, X, codes[:, None], y)


def _merge(defaults: Mapping[str, int], override: Mapping[str, int] | None) -> dict[str, int]:
    counts = dict(defaults)
    for k, v in (override or {}).items():
        _check_source(k, SOURCES)
        if v < 0:
            raise ValueError(f"count for {k!r} must be nonnegative")
        counts[k] = int(v)
    return counts


def generate_parabola(
    seed: int = 0,
    train_counts: Mapping[str, int] | None = None,
    test_counts: Mapping[str, int] | None = None,
    design: str = "grid",
) -> tuple[MultiSourceDataset, MultiSourceDataset]:
    """Training rows on an even grid over [-10, 10] per source (or seeded-uniform
    with ``design="uniform"``); test rows always seeded-uniform."""
    if design not in ("grid", "uniform"):
        raise ValueError(f"unknown design {design!r}")
    train_counts = _merge(PARABOLA_TRAIN, train_counts)
    test_counts = _merge(PARABOLA_TEST, test_counts)
    rng = make_rng(seed)
    lo, hi = PARABOLA_DOMAIN
    schema = _schema(("x",), "y")
    train, test = [], []
    for s in SOURCES:
        n = train_counts[s]
        x = np.linspace(lo, hi, n) if design == "grid" else rng.uniform(lo, hi, n)
        train.append((s, x, parabola_value(s, x)))
    for s in SOURCES:
        x = rng.uniform(lo, hi, test_counts[s])
        test.append((s, x, parabola_value(s, x)))
    return _assemble(schema, train), _assemble(schema, test)


def generate_ackley(
    seed: int = 0,
    train_counts: Mapping[str, int] | None = None,
    test_counts: Mapping[str, int] | None = None,
    params: AckleyParams = AckleyParams(),
) -> tuple[MultiSourceDataset, MultiSourceDataset]:
    train_counts = _merge(ACKLEY_TRAIN, train_counts)
    test_counts = _merge(ACKLEY_TEST, test_counts)
    rng = make_rng(seed)
    lo, hi = ACKLEY_DOMAIN
    schema = _schema(("x1", "x2"), "z")
    out = []
    for counts in (train_counts, test_counts):
        blocks = []
        for s in SOURCES:
            P = rng.uniform(lo, hi, size=(counts[s], 2))
            blocks.append((s, P, ackley_value(s, P[:, 0], P[:, 1], params)))
        out.append(_assemble(schema, blocks))
    return out[0], out[1]


def write_benchmark(
    train: MultiSourceDataset, test: MultiSourceDataset, out_dir: str | Path
) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"train": out / "train.csv", "test": out / "test.csv", "schema": out / "schema.cfg"}
    train.to_csv(paths["train"])
    test.to_csv(paths["test"])
    write_schema(train.schema, paths["schema"])
    return paths
