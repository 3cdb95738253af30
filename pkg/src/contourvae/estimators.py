"""scikit-learn style wrappers around the functional core.

Typical use::

    pipe = make_pipeline(ContourFeaturizer(s=100), ContourVAE(k=8))
    pipe.fit(ensemble)
    codes = pipe.transform(ensemble)
    contours = pipe.inverse_transform(codes)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .geometry import Polyline, resample_arclength
from .ingest import Ensemble, FeatureVector, NormalizationParams
from .latent_stats import sample_prior
from .pca_baseline import pca_fit, pca_project, pca_reconstruct, pca_sample
from .vae import TrainConfig, decode_array, encode, train

__all__ = ["ContourFeaturizer", "ContourVAE", "GaussianPCA", "as_feature_vectors"]


def _members(X):
    if isinstance(X, Ensemble):
        return list(X.members), X.domain_bounds
    members = list(X)
    if not members or not all(isinstance(m, Polyline) for m in members):
        raise TypeError("expected an Ensemble or a sequence of Polyline")
    return members, None


class ContourFeaturizer(TransformerMixin, BaseEstimator):
    """Polylines -> ``(n, 2*s)`` arc-length feature matrix, and back.

    The normalization is learned in ``fit`` from the ensemble's domain bounds
    (or the members' bounding box for a bare list).
    """

    def __init__(self, s=100, align=False):
        self.s = s
        self.align = align

    def fit(self, X, y=None):
        if self.s < 2:
            raise ValueError("s must be at least 2")
        members, bounds = _members(X)
        if bounds is None:
            pts = np.vstack([m.points for m in members])
            bounds = (*pts.min(axis=0), *pts.max(axis=0))
        self.norm_ = NormalizationParams.from_bounds(bounds)
        self.closed_ = bool(members[0].closed)
        self.n_features_out_ = 2 * self.s
        return self

    def transform(self, X):
        check_is_fitted(self, "norm_")
        members, _ = _members(X)
        rows = [
            self.norm_.apply(resample_arclength(m, self.s, align=self.align).points).reshape(-1)
            for m in members
        ]
        return np.vstack(rows)

    def inverse_transform(self, X):
        check_is_fitted(self, "norm_")
        X = check_array(X)
        if X.shape[1] != 2 * self.s:
            raise ValueError(f"expected {2 * self.s} columns, got {X.shape[1]}")
        return [Polyline(self.norm_.invert(row.reshape(-1, 2)), closed=self.closed_) for row in X]


class ContourVAE(TransformerMixin, BaseEstimator):
    """VAE on feature rows; ``transform`` gives posterior means, ``inverse_transform`` decodes."""

    def __init__(self, k=8, epochs=4000, learning_rate=1e-3, beta=1.0, warmup=0.1,
                 hidden=(128, 64), random_state=42):
        self.k = k
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta = beta
        self.warmup = warmup
        self.hidden = hidden
        self.random_state = random_state

    def _config(self, n_features):
        return TrainConfig(epochs=self.epochs, lr=self.learning_rate, beta=self.beta,
                           seed=self.random_state, k=self.k, s=n_features // 2,
                           warmup=self.warmup, hidden=tuple(self.hidden))

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        if X.shape[1] % 2:
            raise ValueError("feature rows must hold interleaved (x, y) pairs")
        self.model_, self.loss_history_ = train(X, self._config(X.shape[1]))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        mu, _ = encode(self.model_, check_array(X))
        return mu

    def encode(self, X):
        """Posterior ``(mu, logvar)``."""
        check_is_fitted(self, "model_")
        return encode(self.model_, check_array(X))

    def inverse_transform(self, Z):
        check_is_fitted(self, "model_")
        return decode_array(self.model_, check_array(Z))

    def sample(self, n_samples=1, random_state=0):
        """Decode ``n_samples`` draws from the standard Gaussian prior."""
        check_is_fitted(self, "model_")
        return decode_array(self.model_, sample_prior(self.k, n_samples, random_state).points)


class GaussianPCA(TransformerMixin, BaseEstimator):
    """PCA embedding with a Gaussian fitted to the training embeddings."""

    def __init__(self, n_components=8, covariance="full"):
        self.n_components = n_components
        self.covariance = covariance

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        self.model_ = pca_fit(X, self.n_components, self.covariance)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def explained_variance_(self):
        check_is_fitted(self, "model_")
        return self.model_.eigenvalues

    @property
    def components_(self):
        check_is_fitted(self, "model_")
        return self.model_.components

    def transform(self, X):
        check_is_fitted(self, "model_")
        return pca_project(self.model_, check_array(X))

    def inverse_transform(self, Y):
        check_is_fitted(self, "model_")
        return pca_reconstruct(self.model_, check_array(Y))

    def sample(self, n_samples=1, random_state=0):
        check_is_fitted(self, "model_")
        return pca_sample(self.model_, n_samples, random_state, as_features=False)


def as_feature_vectors(X, closed=False):
    """Rows of a feature matrix as FeatureVector objects."""
    X = np.atleast_2d(X)
    return [FeatureVector(row, X.shape[1] // 2, closed) for row in X]
