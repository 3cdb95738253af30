"""Linear baseline: PCA embedding with a Gaussian fitted to member embeddings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, NumericalError
from .ingest import FeatureVector

__all__ = [
    "PcaModel",
    "pca_fit",
    "pca_project",
    "pca_reconstruct",
    "pca_sample",
    "save_pca",
    "load_pca",
]

PCA_FORMAT = "contourvae-pca"
PCA_VERSION = 1


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    eigenvalues: np.ndarray  # (k,), descending
    fit_mean: np.ndarray  # (k,)
    fit_cov: np.ndarray  # (k, k)
    all_eigenvalues: np.ndarray  # full spectrum of the sample covariance
    s: int = None
    closed: bool = False
    covariance: str = "full"

    @property
    def k(self):
        return self.components.shape[0]

    @property
    def discarded_variance(self):
        return float(self.all_eigenvalues[self.k:].sum())


def _matrix(features):
    if isinstance(features, (list, tuple)) and features and isinstance(features[0], FeatureVector):
        return np.vstack([f.values for f in features])
    return np.asarray(features, dtype=np.float64)


def pca_fit(features, k: int = 8, covariance: str = "full") -> PcaModel:
    """Fit PCA through an SVD of the centered data and a Gaussian on the embedding.

    The sample covariance uses the ``n - 1`` denominator. ``covariance`` is
    ``"full"`` or ``"diag"`` for the embedding Gaussian.
    """
    X = _matrix(features)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("PCA needs at least 2 feature vectors")
    n, d = X.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} must lie in [1, min(n-1, d)] = [1, {min(n - 1, d)}]")
    if covariance not in ("full", "diag"):
        raise ValueError("covariance must be 'full' or 'diag'")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, sv, vt = np.linalg.svd(Xc, full_matrices=False)
    spectrum = sv**2 / (n - 1)
    comps = vt[:k].copy()
    # deterministic sign: largest-magnitude loading of each component positive
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    Y = Xc @ comps.T
    fit_mean = Y.mean(axis=0)
    fit_cov = np.atleast_2d(np.cov(Y, rowvar=False, ddof=1))
    if covariance == "diag":
        fit_cov = np.diag(np.diag(fit_cov))
    s = None
    closed = False
    if isinstance(features, (list, tuple)) and isinstance(features[0], FeatureVector):
        s, closed = features[0].s, features[0].closed
    return PcaModel(mean, comps, spectrum[:k].copy(), fit_mean, fit_cov, spectrum, s, closed, covariance)


def pca_project(model: PcaModel, x) -> np.ndarray:
    x = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValueError(f"expected {model.mean.shape[0]} features, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != model.k:
        raise ValueError(f"embedding must have length {model.k}, got {y.shape[-1]}")
    return model.mean + y @ model.components


def pca_sample(model: PcaModel, count: int, seed: int, as_features: bool = True):
    """Draw embeddings from the fitted Gaussian and reconstruct them linearly."""
    if count < 1:
        raise ValueError("count must be >= 1")
    w, v = np.linalg.eigh(model.fit_cov)
    if w.min() < -1e-10:
        raise NumericalError(f"embedding covariance is not PSD (eigenvalue {w.min():.3e})")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    y = model.fit_mean + rng.standard_normal((count, model.k)) @ root.T
    X = pca_reconstruct(model, y)
    if not as_features:
        return X
    s = model.s if model.s is not None else X.shape[1] // 2
    return [FeatureVector(row, s, model.closed) for row in X]


def save_pca(model: PcaModel, path):
    doc = {
        "format": PCA_FORMAT,
        "version": PCA_VERSION,
        "s": model.s,
        "closed": model.closed,
        "covariance": model.covariance,
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "all_eigenvalues": model.all_eigenvalues.tolist(),
        "fit_mean": model.fit_mean.tolist(),
        "fit_cov": model.fit_cov.tolist(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_pca(path) -> PcaModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt PCA checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != PCA_FORMAT:
        raise CheckpointError("not a contourvae PCA checkpoint")
    if doc.get("version") != PCA_VERSION:
        raise CheckpointError(f"unsupported PCA checkpoint version {doc.get('version')!r}")
    arr = lambda key: np.array(doc[key], dtype=np.float64)  # noqa: E731
    try:
        return PcaModel(arr("mean"), arr("components"), arr("eigenvalues"), arr("fit_mean"),
                        arr("fit_cov"), arr("all_eigenvalues"), doc["s"], bool(doc["closed"]),
                        doc["covariance"])
    except KeyError as exc:
        raise CheckpointError(f"corrupt PCA checkpoint: missing {exc}") from exc
