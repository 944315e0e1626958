"""scikit-learn compatible wrappers around the stateful pieces.

Only the operations that genuinely have a fit/transform shape are wrapped:
identity-wise z-normalization learns per-group statistics, and Gaussian
smoothing is a stateless row transformer usable inside a ``Pipeline``.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DegenerateGroupWarning
from .signal import gaussian_smooth


def _column(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got {X.shape[1]}")
        X = X[:, 0]
    return X


class IdentityZNormalizer(TransformerMixin, BaseEstimator):
    """Standardize a per-clip statistic within each speaker identity.

    Uses the population standard deviation. Groups with one member or zero
    variance transform to 0 and raise a :class:`DegenerateGroupWarning`
    during ``fit``.

    Examples
    --------
    >>> IdentityZNormalizer().fit_transform([1.0, 3.0], groups=["a", "a"])
    array([-1.,  1.])
    """

    def fit(self, X, y=None, groups=None):
        x = _column(X)
        groups = np.asarray(groups if groups is not None else np.zeros(x.size, dtype=int))
        if groups.shape != x.shape:
            raise ValueError("groups must have one entry per sample")
        self.means_ = {}
        self.scales_ = {}
        for g in sorted(set(groups.tolist()), key=str):
            v = x[groups == g]
            mu = v.mean()
            sd = np.sqrt(np.mean((v - mu) ** 2))
            if v.size < 2 or np.all(v == v[0]):
                warnings.warn(f"group {g!r}: degenerate; maps to 0", DegenerateGroupWarning)
                sd = 0.0
            self.means_[g] = mu
            self.scales_[g] = sd
        self.n_features_in_ = 1
        return self

    def transform(self, X, groups=None):
        check_is_fitted(self, "means_")
        x = _column(X)
        groups = np.asarray(groups if groups is not None else np.zeros(x.size, dtype=int))
        out = np.empty_like(x)
        for n, (v, g) in enumerate(zip(x, groups.tolist())):
            if g not in self.means_:
                raise ValueError(f"group {g!r} was not seen during fit")
            sd = self.scales_[g]
            out[n] = 0.0 if sd == 0 else (v - self.means_[g]) / sd
        return out

    def fit_transform(self, X, y=None, groups=None):
        return self.fit(X, y, groups=groups).transform(X, groups=groups)


class GaussianSmoother(TransformerMixin, BaseEstimator):
    """Smooth each row of ``X`` (one series per row) with a Gaussian kernel."""

    def __init__(self, sigma=1.0):
        self.sigma = sigma

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        return np.vstack([gaussian_smooth(row, self.sigma) for row in X])
