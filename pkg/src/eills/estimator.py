"""scikit-learn compatible wrapper around the exhaustive EILLS solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted, check_X_y

from .data import MultiEnvDataset, compute_stats, sample_size_diagnostics
from .solver import SearchConfig, l0_exhaustive


class EILLSRegressor(RegressorMixin, BaseEstimator):
    """Environment invariant linear least squares.

    Minimizes pooled squared error plus ``gamma`` times the focused invariance
    regularizer (and ``lam`` times the number of nonzero coefficients) by
    exhaustive support search. ``gamma=0, lam=0`` is pooled least squares.

    Parameters
    ----------
    gamma : float, default=20.0
        Weight of the invariance regularizer.
    lam : float, default=0.0
        l0 penalty per selected variable.
    weights : {"proportional", "equal"} or array-like, default="proportional"
        Environment weights, in order of first appearance of each label.
    max_support_size : int or None, default=None
        Largest support enumerated; ``None`` means all ``p`` columns.
    include_empty : bool, default=True
    singular_policy : {"reject", "min_norm"}, default="reject"

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    support_ : ndarray of int
        Indices of the nonzero coefficients.
    objective_ : ObjectiveValue
    fit_result_ : FitResult
    weights_ : ndarray of shape (n_environments,)
    environments_ : list
        Environment labels in weight order.
    diagnostics_ : SampleSizeDiagnostics
    """

    def __init__(
        self,
        gamma=20.0,
        lam=0.0,
        weights="proportional",
        max_support_size=None,
        include_empty=True,
        singular_policy="reject",
    ):
        self.gamma = gamma
        self.lam = lam
        self.weights = weights
        self.max_support_size = max_support_size
        self.include_empty = include_empty
        self.singular_policy = singular_policy

    def fit(self, X, y, env):
        """Fit on stacked data; ``env[i]`` labels the environment of row ``i``."""
        X, y = check_X_y(X, y, y_numeric=True)
        env = np.asarray(env)
        check_consistent_length(X, env)
        ds = MultiEnvDataset.from_arrays(X, y, env, weights=self.weights)
        stats = compute_stats(ds)
        config = SearchConfig(
            gamma=float(self.gamma),
            lam=float(self.lam),
            max_support_size=self.max_support_size,
            include_empty=self.include_empty,
            singular_policy=self.singular_policy,
        )
        result = l0_exhaustive(stats, ds.weights, config)
        self.fit_result_ = result
        self.coef_ = np.array(result.beta)
        self.support_ = np.array(result.support, dtype=int)
        self.objective_ = result.objective
        self.weights_ = np.array(ds.weights)
        self.environments_ = ds.env_ids
        self.diagnostics_ = sample_size_diagnostics(ds)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, estimator was fit with {self.n_features_in_}")
        return X @ self.coef_

    def get_support(self, indices=False):
        """Mask (or indices) of the selected columns."""
        check_is_fitted(self, "coef_")
        if indices:
            return self.support_.copy()
        return self.coef_ != 0
