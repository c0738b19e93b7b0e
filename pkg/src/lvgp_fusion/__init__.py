"""Source-aware Gaussian-process data fusion.

Data sources enter the model as a categorical variable whose levels are
embedded in a learned 2-D latent space, alongside any other categorical
inputs. See :func:`fit_lvgp` and :func:`latent_map`.
"""

from .dataset import (
    MultiSourceDataset,
    Standardizer,
    VariableSchema,
    holdout_from_source,
    load_csv,
    read_schema,
    standardize,
    stratified_kfold,
)
from .evaluation import EvalReport, SurfaceSpec, Sweep, nrmse, parity_export, run_cv, surface_export
from .gp import FitOptions, GPModel, fit_gp, predict
from .lvgp import (
    LatentMap,
    LVGPModel,
    dissimilarity,
    filter_sources,
    fit_lvgp,
    latent_map,
    predict_dataset,
    predict_lvgp,
    split_source,
)
from .modelfile import load_model, save_model

__all__ = [
    "EvalReport",
    "FitOptions",
    "GPModel",
    "LVGPModel",
    "LatentMap",
    "MultiSourceDataset",
    "Standardizer",
    "SurfaceSpec",
    "Sweep",
    "VariableSchema",
    "dissimilarity",
    "filter_sources",
    "fit_gp",
    "fit_lvgp",
    "holdout_from_source",
    "latent_map",
    "load_csv",
    "load_model",
    "nrmse",
    "parity_export",
    "predict",
    "predict_dataset",
    "predict_lvgp",
    "read_schema",
    "run_cv",
    "save_model",
    "split_source",
    "standardize",
    "stratified_kfold",
    "surface_export",
]
