"""scikit-learn compatible wrappers around the marginal law and the extremal-index estimators."""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DEFAULT_DEPTH, Params
from .marginal import cdf_array, quantile, sample_stationary
from .simulate import decluster_runs


class CantorMarginal(TransformerMixin, BaseEstimator):
    """Probability integral transform for the stationary law F_{beta,p}.

    ``transform`` maps values to F(x), ``inverse_transform`` applies the
    generalised inverse.  Nothing is learned from data; ``fit`` validates
    the parameters and records them.

    >>> m = CantorMarginal(beta=1/3, p=0.5).fit()
    >>> float(m.transform([[0.25]])[0, 0])
    0.3333333333333333
    """

    def __init__(self, beta=1 / 3, p=0.5, depth=DEFAULT_DEPTH):
        self.beta = beta
        self.p = p
        self.depth = depth

    def fit(self, X=None, y=None):
        self.params_ = Params(self.beta, self.p)
        if X is not None:
            self.n_features_in_ = np.atleast_2d(np.asarray(X, dtype=float)).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=float)
        values, _ = cdf_array(self.params_, X.ravel(), self.depth)
        return np.asarray(values).reshape(X.shape)

    def inverse_transform(self, U):
        check_is_fitted(self, "params_")
        U = np.asarray(U, dtype=float)
        out = np.array([quantile(self.params_, float(u), self.depth) for u in U.ravel()])
        return out.reshape(U.shape)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "params_")
        rng = np.random.default_rng(random_state)
        return np.asarray(sample_stationary(self.params_, rng, self.depth, n_samples))


class ExtremalIndexEstimator(BaseEstimator):
    """Estimate the extremal index from trajectories of a stationary series.

    ``fit`` takes an array of shape (n_paths, length); each row is one
    observed stretch of the series and is treated as a block.  ``runs``
    counts clusters (exceedances separated by at least ``run_gap``
    non-exceedances) per exceedance.  ``ratio`` compares the observed block
    maximum law with the i.i.d. prediction F(u)**length, taking F(u) from
    ``marginal_cdf`` when given and from the pooled exceedance rate
    otherwise.
    """

    def __init__(self, threshold=0.9, run_gap=1, method="runs", marginal_cdf=None):
        self.threshold = threshold
        self.run_gap = run_gap
        self.method = method
        self.marginal_cdf = marginal_cdf

    def fit(self, X, y=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.method not in ("runs", "ratio"):
            raise ValueError("method must be 'runs' or 'ratio'")
        if self.run_gap < 1:
            raise ValueError("run_gap must be >= 1")
        exceed = X > self.threshold
        clusters, counts = decluster_runs(exceed, self.run_gap)
        self.n_features_in_ = X.shape[1]
        self.n_exceedances_ = int(counts.sum())
        self.n_clusters_ = int(clusters.sum())
        if self.method == "runs":
            self.theta_ = self.n_clusters_ / self.n_exceedances_ if self.n_exceedances_ else math.nan
        else:
            none = float(np.mean(counts == 0))
            if self.marginal_cdf is not None:
                f_u = float(self.marginal_cdf)
            else:
                f_u = 1.0 - self.n_exceedances_ / exceed.size
            if 0 < none < 1 and 0 < f_u < 1:
                self.theta_ = math.log(none) / (X.shape[1] * math.log(f_u))
            else:
                self.theta_ = math.nan
        return self

    def predict(self, X=None):
        """Mean cluster size 1/theta (the natural prediction of this model)."""
        check_is_fitted(self, "theta_")
        return 1.0 / self.theta_
