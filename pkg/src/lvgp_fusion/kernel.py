"""Gaussian correlation with latent substitution for categorical levels.

A model-space point is the scaled numeric vector followed by the latent pairs
of its categorical levels. Numeric differences are weighted by ``phi``; the
latent part enters as an unweighted squared Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from .errors import SingularMatrixError

DEFAULT_NUGGET = 1e-6
MAX_NUGGET = 1e-2


@dataclass(frozen=True, eq=False)
class MixedPoint:
    numeric: np.ndarray
    latent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "numeric", np.atleast_1d(np.asarray(self.numeric, dtype=float)))
        object.__setattr__(self, "latent", np.atleast_1d(np.asarray(self.latent, dtype=float)))


def _check_phi(phi) -> np.ndarray:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if not (np.all(np.isfinite(phi)) and np.all(phi > 0)):
        raise ValueError("length-scale weights must be finite and positive")
    return phi


def _weighted(weights: np.ndarray, sq):
    # fixed left-to-right accumulation shared by scalar and matrix paths
    total = np.zeros(np.shape(sq)[1:]) if np.ndim(sq) > 1 else 0.0
    for i in range(len(weights)):
        total = total + weights[i] * sq[i]
    return total


def gaussian_corr(x, x2, phi) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    phi = _check_phi(phi)
    if not (x.shape == x2.shape == phi.shape):
        raise ValueError(f"dimension mismatch: {x.shape}, {x2.shape}, phi {phi.shape}")
    return float(np.exp(-_weighted(phi, (x - x2) ** 2)))


def mixed_corr(w: MixedPoint, w2: MixedPoint, phi) -> float:
    phi = _check_phi(phi)
    if not (w.numeric.shape == w2.numeric.shape == phi.shape) or w.latent.shape != w2.latent.shape:
        raise ValueError("dimension mismatch between mixed points")
    if w.latent.size % 2:
        raise ValueError("latent part must hold coordinate pairs")
    num = _weighted(phi, (w.numeric - w2.numeric) ** 2)
    lat = _weighted(np.ones(w.latent.size), (w.latent - w2.latent) ** 2)
    return float(np.exp(-(num + lat)))


def embed(codes: np.ndarray, latents: Sequence[np.ndarray]) -> np.ndarray:
    """Substitute latent pairs for level codes: (n, q') codes -> (n, 2q') coordinates."""
    codes = np.asarray(codes, dtype=np.int64)
    if len(latents) == 0:
        return np.zeros((codes.shape[0], 0))
    return np.concatenate([np.asarray(z, dtype=float)[codes[:, j]] for j, z in enumerate(latents)], axis=1)


def mixed_points(X: np.ndarray, codes: np.ndarray, latents: Sequence[np.ndarray]) -> list[MixedPoint]:
    lat = embed(codes, latents)
    return [MixedPoint(x, z) for x, z in zip(np.asarray(X, dtype=float), lat)]


def numeric_sqdiff(X: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
    """Per-dimension squared differences, shape (m, n, n2)."""
    X = np.asarray(X, dtype=float)
    X2 = X if X2 is None else np.asarray(X2, dtype=float)
    return (X.T[:, :, None] - X2.T[:, None, :]) ** 2


def latent_sqdist(Z: np.ndarray, Z2: np.ndarray | None = None) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    Z2 = Z if Z2 is None else np.asarray(Z2, dtype=float)
    if Z.shape[1] == 0:
        return np.zeros((Z.shape[0], Z2.shape[0]))
    return _weighted(np.ones(Z.shape[1]), (Z.T[:, :, None] - Z2.T[:, None, :]) ** 2)


def level_sqdist(codes: np.ndarray, latents: Sequence[np.ndarray]) -> np.ndarray:
    """Training-matrix latent term via per-variable level tables (fast path for fitting)."""
    codes = np.asarray(codes, dtype=np.int64)
    n = codes.shape[0]
    total = np.zeros((n, n))
    for j, z in enumerate(latents):
        z = np.asarray(z, dtype=float)
        table = (z[:, None, 0] - z[None, :, 0]) ** 2 + (z[:, None, 1] - z[None, :, 1]) ** 2
        c = codes[:, j]
        total = total + table[c[:, None], c[None, :]]
    return total


def corr_from_parts(sqdiff: np.ndarray, phi: np.ndarray, lat_sq: np.ndarray) -> np.ndarray:
    """Correlation from precomputed squared differences.

    The numeric term is accumulated dimension by dimension so the result is
    bitwise identical to :func:`gaussian_corr` / :func:`mixed_corr`.
    """
    return np.exp(-(_weighted(phi, sqdiff) + lat_sq))


@dataclass(frozen=True, eq=False)
class CorrFactor:
    """Correlation matrix with nugget and its lower Cholesky factor."""

    C: np.ndarray
    L: np.ndarray
    nugget: float

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.L, True), b, check_finite=False)


def cholesky(C: np.ndarray) -> np.ndarray | None:
    """Lower Cholesky factor, or None when C is not numerically positive definite."""
    try:
        L = linalg.cholesky(C, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(L)):
        return None
    return L


def factor_with_nugget(
    R: np.ndarray, nugget: float = DEFAULT_NUGGET, escalate: bool = True
) -> CorrFactor:
    """Add a diagonal nugget and factor; on failure grow it x10 up to 1e-2."""
    nug = float(nugget)
    while True:
        C = R + nug * np.eye(R.shape[0])
        L = cholesky(C)
        if L is not None:
            return CorrFactor(C, L, nug)
        if not escalate or nug >= MAX_NUGGET:
            break
        nug = min(max(nug * 10.0, 1e-12), MAX_NUGGET)
    raise SingularMatrixError(_singular_message(R, nug))


def _singular_message(R: np.ndarray, nugget: float) -> str:
    dup = np.argwhere(np.triu(R >= 1.0 - 1e-12, k=1))
    msg = f"correlation matrix is not positive definite at nugget {nugget:g}"
    if len(dup):
        pairs = ", ".join(f"({i},{j})" for i, j in dup[:5])
        msg += f"; duplicate rows {pairs}"
    return msg


def corr_matrix(
    points: Sequence[MixedPoint],
    phi,
    nugget: float = DEFAULT_NUGGET,
    escalate: bool = True,
) -> CorrFactor:
    if len(points) == 0:
        raise ValueError("need at least one point")
    phi = _check_phi(phi)
    X = np.stack([p.numeric for p in points])
    Z = np.stack([p.latent for p in points])
    if X.shape[1] != len(phi):
        raise ValueError("dimension mismatch between points and phi")
    R = corr_from_parts(numeric_sqdiff(X), phi, latent_sqdist(Z))
    return factor_with_nugget(R, nugget, escalate)


def cross_corr(wstar: MixedPoint, training: Sequence[MixedPoint], phi) -> np.ndarray:
    if len(training) == 0:
        raise ValueError("training set is empty")
    phi = _check_phi(phi)
    X = np.stack([p.numeric for p in training])
    Z = np.stack([p.latent for p in training])
    if wstar.numeric.shape != (X.shape[1],) or wstar.latent.shape != (Z.shape[1],) or len(phi) != X.shape[1]:
        raise ValueError("dimension mismatch between query and training points")
    r = corr_from_parts(numeric_sqdiff(wstar.numeric[None, :], X), phi, latent_sqdist(wstar.latent[None, :], Z))
    return r[0]


def latent_arrays(latents: Mapping[str, np.ndarray], order: Sequence[str]) -> list[np.ndarray]:
    return [np.asarray(latents[name], dtype=float) for name in order]
