"""scikit-learn style wrappers over the functional API.

These are conveniences for pipelines and grid searches.  Each one only
validates its input and calls the corresponding module function, so the
functional modules stay the source of truth.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array

from . import lattice, subdet, weyl
from ._common import as_fraction
from .quadform import QuadForm


class ShellCountTransformer(TransformerMixin, BaseEstimator):
    """Rows of X are diagonal coefficients; output is the shell projector norm per row.

    ``lam`` and ``delta`` are passed through :func:`as_fraction`, so give
    decimal strings when the exact value matters.
    """

    def __init__(self, lam="10", delta="0.1", cutoff: str = "indicator"):
        self.lam = lam
        self.delta = delta
        self.cutoff = cutoff

    def fit(self, X, y=None):
        X = check_array(X, dtype=None)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X, dtype=None)
        cut = lattice.CutoffSpec(self.cutoff)
        lam, delta = as_fraction(self.lam), as_fraction(self.delta)
        out = [lattice.projector_l1linf(lattice.ShellQuery(QuadForm.diagonal(list(row)), lam, delta), cut)
               for row in X]
        return np.asarray(out, dtype=float).reshape(-1, 1)


class ArcClassifier(ClassifierMixin, BaseEstimator):
    """Labels times t (single column) as lambda0 (near 0), major or minor arcs at scale N.

    There is nothing to learn; ``fit`` records the label set so the estimator
    works inside scikit-learn tooling.
    """

    def __init__(self, N: int = 64, c0="1/8"):
        self.N = N
        self.c0 = c0

    def fit(self, X, y=None):
        check_array(X, dtype=None)
        self.classes_ = np.array(["lambda0", "major", "minor"])
        return self

    def predict(self, X):
        X = check_array(X, dtype=None)
        c0 = as_fraction(self.c0)
        return np.array([weyl.classify_arc(row[0], self.N, c0).kind for row in X])

    def arc_denominators(self, X) -> np.ndarray:
        """Dyadic bucket Q of each time (0 off the major arcs)."""
        X = check_array(X, dtype=None)
        c0 = as_fraction(self.c0)
        return np.array([weyl.classify_arc(row[0], self.N, c0).Q for row in X])


class SubdetProfiler(TransformerMixin, BaseEstimator):
    """Rows of X are p x q matrices flattened row-major; output columns are D_1..D_m."""

    def __init__(self, shape: tuple = (2, 3)):
        self.shape = shape

    def fit(self, X, y=None):
        X = check_array(X, dtype=None)
        p, q = self.shape
        if X.shape[1] != p * q:
            raise ValueError(f"expected {p * q} features for shape {self.shape}, got {X.shape[1]}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X, dtype=float)
        p, q = self.shape
        return subdet.batch_max_subdets_float(X.reshape(-1, p, q))
