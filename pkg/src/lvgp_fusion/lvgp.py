"""Latent-variable GP: categorical levels (including the data source) as 2-D points.

Each categorical variable gets one latent pair per level, fitted jointly with
the numeric length-scales. To remove the rigid-motion freedom of the
likelihood, the first level of every variable is pinned at (0, 0) and the
second at (c, 0) with c >= 0; the remaining levels are free in the latent box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import MultiSourceDataset, make_rng, standardize
from .errors import DataError, SchemaError, UnknownLevelError
from .gp import (
    FitOptions,
    GPModel,
    _restart_meta,
    build_model,
    draw_theta,
    fit_with_escalation,
    nll_from_corr,
    predict,
)
from .kernel import corr_from_parts, embed, level_sqdist, numeric_sqdiff

MAX_LATENT_DISTANCE = 3.0 * math.sqrt(2.0)


def n_free_latent(n_levels: int) -> int:
    return max(2 * n_levels - 3, 0)


def unpack_latents(free: np.ndarray, level_counts: Sequence[int]) -> list[np.ndarray]:
    """Expand free latent coordinates into one (L, 2) array per variable."""
    out, pos = [], 0
    for L in level_counts:
        z = np.zeros((L, 2))
        if L >= 2:
            z[1, 0] = free[pos]
            z[2:] = np.reshape(free[pos + 1 : pos + 2 * L - 3], (L - 2, 2))
        pos += n_free_latent(L)
        out.append(z)
    return out


def latent_bounds(level_counts: Sequence[int], box: tuple[float, float]) -> list[tuple[float, float]]:
    lo, hi = box
    bounds = []
    for L in level_counts:
        if L >= 2:
            bounds.append((0.0, hi))
            bounds += [(lo, hi)] * (2 * L - 4)
    return bounds


def draw_latent(rng: np.random.Generator, level_counts: Sequence[int]) -> np.ndarray:
    parts = []
    for L in level_counts:
        if L >= 2:
            parts.append(rng.uniform(0.0, 1.0, size=1))
            parts.append(rng.uniform(-1.0, 1.0, size=2 * L - 4))
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True, eq=False)
class LVGPModel(GPModel):
    latents: dict = field(default_factory=dict)
    codes: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))

    kind = "lvgp"

    @property
    def train_latent(self) -> np.ndarray:
        return embed(self.codes, [self.latents[name] for name in self.schema.categorical])


def _check_levels_present(data: MultiSourceDataset) -> list[int]:
    counts = []
    for j, name in enumerate(data.schema.categorical):
        levels = data.schema.levels[name]
        used = np.bincount(data.codes[:, j], minlength=len(levels))
        empty = [lv for lv, c in zip(levels, used) if c == 0]
        if empty:
            raise DataError(f"level(s) {empty} of {name!r} have no rows; compact the dataset first")
        counts.append(len(levels))
    return counts


def fit_lvgp(data: MultiSourceDataset, opts: FitOptions | None = None) -> LVGPModel:
    opts = opts or FitOptions()
    if data.n < 2:
        raise ValueError("fit_lvgp needs at least 2 rows")
    if not data.schema.categorical:
        raise SchemaError("fit_lvgp needs at least one categorical variable (e.g. a source column)")
    counts = _check_levels_present(data)
    scaled, scaler = standardize(data)
    X, y, codes = scaled.X, scaled.y, scaled.codes
    m = X.shape[1]
    rng = make_rng(opts.seed)
    inits = []
    for _ in range(opts.restarts):
        theta = draw_theta(rng, m, opts)
        inits.append(np.concatenate([theta, draw_latent(rng, counts)]))
    bounds = [opts.theta_bounds] * m + latent_bounds(counts, opts.latent_bounds)
    meta = {"seed": opts.seed, "restarts": opts.restarts}
    names = data.schema.categorical

    if scaler.constant_response:
        latents = dict(zip(names, unpack_latents(np.zeros(sum(map(n_free_latent, counts))), counts)))
        return _assemble(X, y, codes, np.ones(m), latents, opts.nugget, scaler, data, {**meta, "constant_response": True})

    sq = numeric_sqdiff(X)

    def make_objective(nugget):
        def objective(p):
            lat = level_sqdist(codes, unpack_latents(p[m:], counts))
            R = corr_from_parts(sq, 10.0 ** p[:m], lat)
            return nll_from_corr(R, y, nugget)

        return objective

    best, results, nug = fit_with_escalation(make_objective, inits, bounds, opts)
    meta.update(_restart_meta(best, results))
    latents = dict(zip(names, unpack_latents(best.x[m:], counts)))
    return _assemble(X, y, codes, 10.0 ** best.x[:m], latents, nug, scaler, data, meta)


def _assemble(X, y, codes, phi, latents, nugget, scaler, data, meta) -> LVGPModel:
    Z = embed(codes, [latents[name] for name in data.schema.categorical])
    return build_model(
        LVGPModel, X, y, phi, nugget, scaler, data.schema, meta,
        train_latent=Z, latents=latents, codes=np.asarray(codes),
    )


def _query_codes(model: LVGPModel, n: int, levels: Mapping[str, str | Sequence[str]]) -> np.ndarray:
    codes = np.empty((n, len(model.schema.categorical)), dtype=np.int64)
    for j, name in enumerate(model.schema.categorical):
        if name not in levels:
            raise SchemaError(f"missing level for categorical variable {name!r}")
        lab = levels[name]
        labels = [lab] * n if isinstance(lab, str) else list(lab)
        if len(labels) != n:
            raise ValueError(f"{name!r}: expected {n} levels, got {len(labels)}")
        codes[:, j] = [model.schema.level_index(name, str(v)) for v in labels]
    return codes


def predict_lvgp(
    model: LVGPModel, X, levels: Mapping[str, str | Sequence[str]]
) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance (original units).

    ``levels`` maps every categorical variable to one level (applied to all
    rows) or to a per-row sequence of levels.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.X.shape[1]:
        raise ValueError(f"expected {model.X.shape[1]} numeric inputs, got {X.shape[1]}")
    codes = _query_codes(model, len(X), levels)
    Zs = embed(codes, [model.latents[name] for name in model.schema.categorical])
    mean, var = model._posterior(model.standardizer.transform_X(X), Zs)
    return model._to_original(mean, var)


def predict_dataset(model: GPModel, data: MultiSourceDataset) -> tuple[np.ndarray, np.ndarray]:
    """Predict at every row of ``data``, matching levels by label."""
    if isinstance(model, LVGPModel):
        levels = {name: data.level_labels(name) for name in model.schema.categorical}
        return predict_lvgp(model, data.X, levels)
    return predict(model, data.X)


@dataclass(frozen=True, eq=False)
class LatentMap:
    variable: str
    levels: tuple[str, ...]
    coords: np.ndarray
    reference: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).reshape(len(self.levels), 2))
        if self.reference is not None and self.reference not in self.levels:
            raise UnknownLevelError(self.variable, self.reference)

    def coord(self, level: str) -> np.ndarray:
        if level not in self.levels:
            raise UnknownLevelError(self.variable, level)
        return self.coords[self.levels.index(level)]

    def recentered(self, reference: str) -> "LatentMap":
        """Translate every level so ``reference`` sits at the origin."""
        shift = self.coord(reference)
        return LatentMap(self.variable, self.levels, self.coords - shift, reference)

    def distances(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=2))

    @property
    def D(self) -> dict[str, float]:
        return dissimilarity(self)


def latent_map(model: LVGPModel, variable: str, reference: str | None = None) -> LatentMap:
    if not isinstance(model, LVGPModel):
        raise SchemaError("model has no latent variables")
    if variable not in model.latents:
        raise SchemaError(f"{variable!r} is not a categorical variable of the model")
    lm = LatentMap(variable, model.schema.levels[variable], model.latents[variable])
    return lm if reference is None else lm.recentered(reference)


def dissimilarity(lm: LatentMap) -> dict[str, float]:
    """Distance to the reference level in units of the latent box half-diagonal.

    Values can exceed 1 when the reference is not the anchored level.
    """
    if lm.reference is None:
        raise ValueError("latent map has no reference level")
    ref = lm.coord(lm.reference)
    d = np.sqrt(np.sum((lm.coords - ref) ** 2, axis=1)) / MAX_LATENT_DISTANCE
    return {lv: float(v) for lv, v in zip(lm.levels, d)}


def filter_sources(data: MultiSourceDataset, lm: LatentMap, threshold: float) -> MultiSourceDataset:
    """Keep rows whose source lies within ``threshold`` D of the reference."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    if data.schema.source_column != lm.variable:
        raise SchemaError(f"latent map is for {lm.variable!r}, not the source column")
    D = dissimilarity(lm)
    keep = {lv for lv, d in D.items() if d <= threshold} | {lm.reference}
    unknown = set(data.sources) - set(D)
    if unknown:
        raise UnknownLevelError(lm.variable, sorted(unknown)[0])
    mask = np.isin(np.asarray(data.level_labels(lm.variable), dtype=object), list(keep))
    return data.subset(mask).compact()


def split_source(data: MultiSourceDataset, source: str, seed: int) -> MultiSourceDataset:
    """Relabel one source's rows at random into ``<source>_1`` and ``<source>_2``.

    The two new levels take the original level's place in the registry; the
    first label gets the extra row when the count is odd.
    """
    rows = data.rows_of_source(source)
    if len(rows) < 2:
        raise ValueError(f"source {source!r} needs at least 2 rows to split")
    name = data.schema.source_column
    old = data.schema.levels[name]
    new_labels = (f"{source}_1", f"{source}_2")
    clash = set(new_labels) & set(old)
    if clash:
        raise DataError(f"level(s) {sorted(clash)} already exist")
    pos = old.index(source)
    levels = old[:pos] + new_labels + old[pos + 1 :]
    src = data.source_codes
    new_src = np.where(src > pos, src + 1, src)
    perm = make_rng(seed).permutation(rows)
    second = np.sort(perm[(len(rows) + 1) // 2 :])
    new_src[second] = pos + 1
    codes = data.codes.copy()
    codes[:, -1] = new_src
    return MultiSourceDataset(data.schema.with_levels(name, levels), data.X, codes, data.y)
