"""Ordinary (constant-mean) GP regression with profiled maximum likelihood.

The optimizer works on ``theta = log10(phi)``. ``mu`` and ``sigma2`` are
eliminated in closed form, so the objective only depends on the correlation
parameters. Responses are standardized internally; everything returned to the
caller is in original units.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize

from .dataset import MultiSourceDataset, Standardizer, VariableSchema, make_rng, standardize
from .errors import DegeneracyError, UnfittableError
from .kernel import (
    DEFAULT_NUGGET,
    MAX_NUGGET,
    CorrFactor,
    cholesky,
    corr_from_parts,
    factor_with_nugget,
    latent_sqdist,
    numeric_sqdiff,
)

log = logging.getLogger(__name__)

PENALTY = 1e10
FD_STEP = 1e-6


@dataclass(frozen=True)
class FitOptions:
    restarts: int = 8
    seed: int = 0
    nugget: float = DEFAULT_NUGGET
    theta_bounds: tuple[float, float] = (-4.0, 4.0)
    latent_bounds: tuple[float, float] = (-3.0, 3.0)
    maxiter: int = 200
    ftol: float = 1e-8
    threads: int | None = None


@dataclass(frozen=True, eq=False)
class RestartResult:
    index: int
    x0: np.ndarray
    f0: float
    x: np.ndarray
    f: float
    nit: int
    message: str


def profile_estimates(factor: CorrFactor | np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Closed-form MLE of the constant mean and process variance given C.

    ``factor`` is a :class:`CorrFactor` or a lower Cholesky factor of C.
    """
    L = factor.L if isinstance(factor, CorrFactor) else np.asarray(factor)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2:
        raise ValueError("profile estimates need at least 2 observations")
    ones = np.ones(n)
    Cinv_1 = linalg.cho_solve((L, True), ones, check_finite=False)
    mu = float(Cinv_1 @ y / (Cinv_1 @ ones))
    resid = y - mu
    # (y-mu)' C^-1 (y-mu) via one triangular solve
    v = linalg.solve_triangular(L, resid, lower=True, check_finite=False)
    sigma2 = float(v @ v) / n
    if not sigma2 > 1e-14 * (1.0 + float(np.mean(y**2))):
        raise DegeneracyError(f"process variance estimate is degenerate ({sigma2:.3g})")
    return mu, sigma2


def nll_from_corr(R: np.ndarray, y: np.ndarray, nugget: float) -> float:
    """Profiled negative log-likelihood; PENALTY if C cannot be factored."""
    n = len(y)
    L = cholesky(R + nugget * np.eye(n))
    if L is None:
        return PENALTY
    try:
        _, sigma2 = profile_estimates(L, y)
    except DegeneracyError:
        return PENALTY
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    value = 0.5 * n * math.log(2.0 * math.pi * sigma2) + 0.5 * logdet + 0.5 * n
    return value if math.isfinite(value) else PENALTY


def neg_log_likelihood(theta, X: np.ndarray, y: np.ndarray, nugget: float = DEFAULT_NUGGET) -> float:
    """Profiled -log L for scaled inputs ``X`` (n, m) and responses ``y`` at log10 weights ``theta``."""
    sq = numeric_sqdiff(X)
    phi = 10.0 ** np.asarray(theta, dtype=float)
    R = corr_from_parts(sq, phi, 0.0)
    return nll_from_corr(R, np.asarray(y, dtype=float), nugget)


def numerical_gradient(f: Callable[[np.ndarray], float], p: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient."""
    p = np.asarray(p, dtype=float)
    g = np.empty_like(p)
    for i in range(len(p)):
        e = np.zeros_like(p)
        e[i] = h
        g[i] = (f(p + e) - f(p - e)) / (2.0 * h)
    return g


def _thread_count(opts: FitOptions) -> int:
    if opts.threads is not None:
        return max(1, int(opts.threads))
    env = os.environ.get("LVGP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def multistart(
    objective: Callable[[np.ndarray], float],
    inits: Sequence[np.ndarray],
    bounds: Sequence[tuple[float, float]],
    opts: FitOptions,
) -> list[RestartResult]:
    """Bounded L-BFGS-B from each initial point with finite-difference gradients."""

    def fun_and_grad(p):
        return objective(p), numerical_gradient(objective, p)

    def run(i: int, x0: np.ndarray) -> RestartResult:
        f0 = objective(x0)
        if len(x0) == 0:
            return RestartResult(i, x0, f0, x0, f0, 0, "no free parameters")
        res = optimize.minimize(
            fun_and_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": opts.maxiter, "ftol": opts.ftol},
        )
        x, f = np.asarray(res.x, dtype=float), float(res.fun)
        if not f <= f0:
            x, f = x0, f0
        return RestartResult(i, np.asarray(x0), f0, x, f, int(res.nit), str(res.message))

    threads = min(_thread_count(opts), len(inits))
    if threads <= 1:
        return [run(i, x0) for i, x0 in enumerate(inits)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(inits)), inits))


def best_restart(results: Sequence[RestartResult]) -> RestartResult:
    # ties resolve to the lowest restart index
    return min(results, key=lambda r: (r.f, r.index))


def fit_with_escalation(
    make_objective: Callable[[float], Callable[[np.ndarray], float]],
    inits: Sequence[np.ndarray],
    bounds: Sequence[tuple[float, float]],
    opts: FitOptions,
) -> tuple[RestartResult, list[RestartResult], float]:
    """Run the multi-start search, growing the nugget x10 while every restart fails."""
    nug = float(opts.nugget)
    while True:
        results = multistart(make_objective(nug), inits, bounds, opts)
        best = best_restart(results)
        if best.f < PENALTY:
            return best, results, nug
        if nug >= MAX_NUGGET:
            raise UnfittableError(f"no restart produced a factorable correlation matrix (nugget up to {nug:g})")
        log.warning("all restarts failed at nugget %g; escalating", nug)
        nug = min(max(nug * 10.0, 1e-12), MAX_NUGGET)


@dataclass(frozen=True, eq=False)
class GPModel:
    mu: float
    sigma2: float
    phi: np.ndarray
    nugget: float
    X: np.ndarray
    y: np.ndarray
    factor: CorrFactor
    standardizer: Standardizer
    schema: VariableSchema
    meta: dict = field(default_factory=dict)

    kind = "gp"

    @property
    def theta(self) -> np.ndarray:
        return np.log10(self.phi)

    @property
    def train_latent(self) -> np.ndarray:
        return np.zeros((len(self.y), 0))

    @property
    def alpha(self) -> np.ndarray:
        return self.factor.solve(self.y - self.mu)

    def _posterior(self, Xs: np.ndarray, Zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance in standardized units at scaled query points."""
        r = corr_from_parts(numeric_sqdiff(Xs, self.X), self.phi, latent_sqdist(Zs, self.train_latent))
        mean = self.mu + r @ self.alpha
        v = linalg.solve_triangular(self.factor.L, r.T, lower=True, check_finite=False)
        var = self.sigma2 * (1.0 - np.sum(v * v, axis=0))
        return mean, np.maximum(var, 0.0)

    def _to_original(self, mean: np.ndarray, var: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.standardizer.inverse_y(mean), self.standardizer.inverse_var(var)


def build_model(
    cls,
    X: np.ndarray,
    y: np.ndarray,
    phi: np.ndarray,
    nugget: float,
    standardizer: Standardizer,
    schema: VariableSchema,
    meta: dict,
    train_latent: np.ndarray | None = None,
    **extra,
):
    """Factor C at fixed hyperparameters and profile mu, sigma2 (escalating the nugget if needed)."""
    phi = np.asarray(phi, dtype=float)
    Z = np.zeros((len(y), 0)) if train_latent is None else train_latent
    R = corr_from_parts(numeric_sqdiff(X), phi, latent_sqdist(Z))
    factor = factor_with_nugget(R, nugget)
    if standardizer.constant_response:
        mu, sigma2 = 0.0, 0.0
    else:
        mu, sigma2 = profile_estimates(factor, y)
    return cls(mu, sigma2, phi, factor.nugget, X, y, factor, standardizer, schema, meta, **extra)


def draw_theta(rng: np.random.Generator, m: int, opts: FitOptions) -> np.ndarray:
    lo, hi = opts.theta_bounds
    return rng.uniform(lo, hi, size=m)


def fit_gp(data: MultiSourceDataset, opts: FitOptions | None = None) -> GPModel:
    """Fit a numeric-only GP; categorical columns (including the source) are ignored."""
    opts = opts or FitOptions()
    if data.n < 2:
        raise ValueError("fit_gp needs at least 2 rows")
    if data.schema.categorical:
        log.info("fit_gp ignores categorical columns %s", data.schema.categorical)
    scaled, scaler = standardize(data)
    X, y = scaled.X, scaled.y
    m = X.shape[1]
    rng = make_rng(opts.seed)
    inits = [draw_theta(rng, m, opts) for _ in range(opts.restarts)]
    meta = {"seed": opts.seed, "restarts": opts.restarts}
    if scaler.constant_response:
        return build_model(GPModel, X, y, np.ones(m), opts.nugget, scaler, data.schema,
                           {**meta, "constant_response": True})
    sq = numeric_sqdiff(X)

    def make_objective(nugget):
        return lambda theta: nll_from_corr(corr_from_parts(sq, 10.0**theta, 0.0), y, nugget)

    best, results, nug = fit_with_escalation(make_objective, inits, [opts.theta_bounds] * m, opts)
    meta.update(_restart_meta(best, results))
    return build_model(GPModel, X, y, 10.0**best.x, nug, scaler, data.schema, meta)


def _restart_meta(best: RestartResult, results: Sequence[RestartResult]) -> dict:
    return {
        "best_objective": best.f,
        "best_restart": best.index,
        "restart_initial": [r.f0 for r in results],
        "restart_final": [r.f for r in results],
        "restart_iterations": [r.nit for r in results],
    }


def predict(model: GPModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance (original units) at numeric points ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.X.shape[1]:
        raise ValueError(f"expected {model.X.shape[1]} numeric inputs, got {X.shape[1]}")
    Xs = model.standardizer.transform_X(X)
    mean, var = model._posterior(Xs, np.zeros((len(Xs), model.train_latent.shape[1])))
    return model._to_original(mean, var)
