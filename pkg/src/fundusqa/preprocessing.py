"""Standard scaling and principal components analysis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Scaler", "fit_scaler", "apply_scaler", "PcaModel", "fit_pca", "project"]


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        return apply_scaler(self, X)


def fit_scaler(X) -> Scaler:
    """Per-column mean and population standard deviation.

    Raises ``ValueError`` when a column is constant.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_scaler expects a non-empty 2D matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flat = np.flatnonzero(~(std > 0))
    if flat.size:
        raise ValueError(f"constant column(s) at index {flat.tolist()}; cannot standardise")
    return Scaler(mean, std)


def apply_scaler(scaler: Scaler, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return (X - scaler.mean) / scaler.std


@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray  # (k, n_features), rows orthonormal
    explained_variance_ratio: np.ndarray

    def project(self, Xs) -> np.ndarray:
        return project(self, Xs)


def fit_pca(Xs, k: int = 2) -> PcaModel:
    """Top-``k`` eigenvectors of the covariance of an already scaled matrix.

    Each component's sign is fixed so that its largest-magnitude loading is
    positive.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    n, d = Xs.shape
    if k < 1 or k > min(n - 1, d):
        raise ValueError(f"k={k} components impossible for a {n}x{d} matrix")
    cov = np.cov(Xs, rowvar=False).reshape(d, d)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    comps = evecs[:, :k].T.copy()
    lead = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(k), lead])[:, None]
    total = evals.sum()
    ratio = evals[:k] / total if total > 0 else np.zeros(k)
    return PcaModel(comps, ratio)


def project(model: PcaModel, Xs) -> np.ndarray:
    return np.asarray(Xs, dtype=np.float64) @ model.components.T
