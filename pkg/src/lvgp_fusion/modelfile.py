"""Self-contained JSON model files.

Layout (``format_version`` 1)::

    {
      "format_version": 1,
      "kind": "gp" | "lvgp",
      "schema": {numeric_inputs, categorical_inputs, source_column, response_column, levels},
      "standardizer": {x_min, x_max, y_mean, y_std, constant_response},
      "hyperparameters": {mu, sigma2, phi, nugget},
      "latents": {variable: [[z1, z2], ...] in registry order},   # lvgp only
      "training": {X (scaled), y (standardized), codes},
      "meta": {seed, restarts, best_objective, ...}
    }

Floats are written with Python's shortest round-trip repr, so a load gives
back the exact hyperparameters and the correlation factor is rebuilt bit for
bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Standardizer, VariableSchema
from .errors import SchemaError
from .gp import GPModel
from .kernel import corr_from_parts, embed, factor_with_nugget, latent_sqdist, numeric_sqdiff
from .lvgp import LVGPModel

FORMAT_VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_to_dict(model: GPModel) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "schema": model.schema.to_dict(),
        "standardizer": model.standardizer.to_dict(),
        "hyperparameters": {
            "mu": model.mu,
            "sigma2": model.sigma2,
            "phi": model.phi,
            "nugget": model.nugget,
        },
        "training": {"X": model.X, "y": model.y},
        "meta": model.meta,
    }
    if isinstance(model, LVGPModel):
        doc["latents"] = {name: model.latents[name] for name in model.schema.categorical}
        doc["training"]["codes"] = model.codes
    return _plain(doc)


def model_from_dict(doc: dict) -> GPModel:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    kind = doc.get("kind")
    if kind not in ("gp", "lvgp"):
        raise SchemaError(f"unknown model kind {kind!r}")
    schema = VariableSchema.from_dict(doc["schema"])
    scaler = Standardizer.from_dict(doc["standardizer"])
    hp = doc["hyperparameters"]
    phi = np.asarray(hp["phi"], dtype=float)
    X = np.asarray(doc["training"]["X"], dtype=float).reshape(-1, len(schema.numeric_inputs))
    y = np.asarray(doc["training"]["y"], dtype=float)
    common = dict(
        mu=float(hp["mu"]), sigma2=float(hp["sigma2"]), phi=phi, X=X, y=y,
        standardizer=scaler, schema=schema, meta=doc.get("meta", {}),
    )
    if kind == "gp":
        R = corr_from_parts(numeric_sqdiff(X), phi, 0.0)
        factor = factor_with_nugget(R, float(hp["nugget"]), escalate=False)
        return GPModel(nugget=factor.nugget, factor=factor, **common)
    latents = {name: np.asarray(doc["latents"][name], dtype=float).reshape(-1, 2) for name in schema.categorical}
    codes = np.asarray(doc["training"]["codes"], dtype=np.int64).reshape(len(y), len(schema.categorical))
    Z = embed(codes, [latents[name] for name in schema.categorical])
    R = corr_from_parts(numeric_sqdiff(X), phi, latent_sqdist(Z))
    factor = factor_with_nugget(R, float(hp["nugget"]), escalate=False)
    return LVGPModel(nugget=factor.nugget, factor=factor, latents=latents, codes=codes, **common)


def save_model(model: GPModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")
    return path


def load_model(path: str | Path) -> GPModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(doc)
