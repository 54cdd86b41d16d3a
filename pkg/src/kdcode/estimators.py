"""scikit-learn compatible estimators: ``fit`` trains T by ERM, ``transform`` encodes."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .encoders import DEFAULT_TOL, encode_batch
from .erm import train
from .model import Scheme, SchemeSpec, constraint_for, parse_p

__all__ = ["KDimensionalCoder", "NMFCoder", "DictionaryCoder", "SparseCoder", "KMeansCoder"]


class KDimensionalCoder(TransformerMixin, BaseEstimator):
    """Learn an m-by-k implementation T and encode data against it.

    Parameters
    ----------
    scheme : {"nmf", "dictionary", "sparse", "kmeans"}
    n_components : int
        Number of columns k of T.
    r : float
        Radius of the ball the data is assumed to live in.
    c : float
        Bound on the column norms of T.
    s, p : float
        Radius and index of the lp-ball codebook (sparse coding only).
    max_iter : int
        Maximum number of alternating encode/update rounds.
    tol : float
        Encoder tolerance.
    random_state : int, Generator or None

    Attributes
    ----------
    implementation_ : ImplementationMatrix
    components_ : ndarray of shape (n_components, n_features)
        Columns of T as rows, matching scikit-learn's decomposition estimators.
    empirical_risk_ : float
    risk_trace_ : list of float
    n_iter_ : int
    """

    def __init__(
        self,
        scheme="dictionary",
        n_components=2,
        *,
        r=1.0,
        c=1.0,
        s=1.0,
        p=math.inf,
        max_iter=100,
        tol=DEFAULT_TOL,
        random_state=None,
    ):
        self.scheme = scheme
        self.n_components = n_components
        self.r = r
        self.c = c
        self.s = s
        self.p = p
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    # subclasses pin the scheme here instead of exposing it as a parameter
    _fixed_scheme: str | None = None

    def _spec(self, m: int) -> SchemeSpec:
        scheme = Scheme.parse(self._fixed_scheme or self.scheme)
        s = getattr(self, "s", 1.0)
        p = parse_p(getattr(self, "p", math.inf))
        return SchemeSpec(scheme, m, int(self.n_components), r=self.r, c=self.c, s=s, p=p)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.spec_ = self._spec(X.shape[1])
        self.n_features_in_ = X.shape[1]
        report = train(self.spec_, X, outer_iters=self.max_iter, tol=self.tol, random_state=self.random_state)
        self.implementation_ = report.T
        self.components_ = np.array(report.T.entries.T)
        self.empirical_risk_ = report.empirical_risk
        self.risk_trace_ = report.risk_trace
        self.n_iter_ = report.iterations
        self.flags_ = report.flags
        return self

    def _encode(self, X):
        check_is_fitted(self, "implementation_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, estimator was fitted with {self.n_features_in_}")
        return encode_batch(X, self.implementation_, constraint_for(self.spec_), tol=self.tol)

    def transform(self, X):
        """Optimal codes, shape ``(n_samples, n_components)``."""
        return self._encode(X).codes

    def inverse_transform(self, codes):
        check_is_fitted(self, "implementation_")
        codes = check_array(codes, dtype=np.float64)
        return codes @ self.components_

    def reconstruction_error(self, X):
        """Per-sample squared distance to the reconstruction set."""
        return self._encode(X).losses

    def score(self, X, y=None):
        """Negative empirical risk, so larger is better."""
        return -float(self.reconstruction_error(X).mean())


class _FixedSchemeCoder(KDimensionalCoder):
    def __init__(self, n_components=2, *, r=1.0, c=1.0, max_iter=100, tol=DEFAULT_TOL, random_state=None):
        self.n_components = n_components
        self.r = r
        self.c = c
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state


class NMFCoder(_FixedSchemeCoder):
    """Non-negative codes; T is kept non-negative with columns of norm c."""

    _fixed_scheme = "nmf"


class DictionaryCoder(_FixedSchemeCoder):
    """Codes constrained to the unit l2 ball."""

    _fixed_scheme = "dictionary"


class SparseCoder(KDimensionalCoder):
    """Codes constrained to the lp ball of radius ``s``; ``p`` is 1, 2 or inf."""

    _fixed_scheme = "sparse"

    def __init__(
        self, n_components=2, *, r=1.0, c=1.0, s=1.0, p=1.0, max_iter=100, tol=DEFAULT_TOL, random_state=None
    ):
        self.n_components = n_components
        self.r = r
        self.c = c
        self.s = s
        self.p = p
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state


class KMeansCoder(ClusterMixin, _FixedSchemeCoder):
    """Vector quantization; ``predict`` returns the index of the nearest center."""

    _fixed_scheme = "kmeans"

    def fit(self, X, y=None):
        super().fit(X, y)
        self.labels_ = self.predict(X)
        return self

    def predict(self, X):
        return np.argmax(self.transform(X), axis=1)

    @property
    def cluster_centers_(self):
        check_is_fitted(self, "implementation_")
        return self.components_
