"""scikit-learn style wrapper: ``fit`` solves for s*, ``predict`` returns intervals.

Input rows are ``(beta_hat, sigma_hat)`` pairs.  Fitting needs no data since s*
depends only on (m, eta, alpha, q); ``X`` is accepted and ignored so the object
composes with sklearn tooling.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .optimizer import OptimizationProblem, optimize
from .scad import interval_endpoints, scad_estimate
from .stats_core import SCAD_A, ProblemConfig


class ScadIntervalEstimator(BaseEstimator):
    """Confidence interval J(s*) centred on the SCAD estimate.

    Parameters
    ----------
    m : int
        Residual degrees of freedom.
    eta : float
        SCAD tuning parameter on the standardized scale.
    alpha : float
        One minus the nominal coverage.
    q : int
        Number of spline knots on [0, a eta].
    multistart, seed : int
        Optimizer restarts and the seed for the random ones.
    """

    def __init__(self, m=200, eta=1.0, alpha=0.05, a=SCAD_A, q=6, multistart=4, seed=0):
        self.m = m
        self.eta = eta
        self.alpha = alpha
        self.a = a
        self.q = q
        self.multistart = multistart
        self.seed = seed

    def _config(self):
        return ProblemConfig(m=self.m, eta=self.eta, alpha=self.alpha, a=self.a)

    def fit(self, X=None, y=None):
        cfg = self._config()
        result = optimize(OptimizationProblem(cfg, q=self.q, multistart=self.multistart,
                                              seed=self.seed))
        self.result_ = result
        self.spline_ = result.s_star
        self.objective_ = result.objective
        return self

    @staticmethod
    def _split(X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValidationError("X must have shape (n, 2): beta_hat, sigma_hat", field="X")
        return X[:, 0], X[:, 1]

    def predict(self, X):
        """Interval endpoints, shape (n, 2)."""
        check_is_fitted(self, "spline_")
        beta, sigma = self._split(X)
        lo, hi = interval_endpoints(beta, sigma, self.spline_, self.spline_.cfg)
        return np.column_stack([lo, hi])

    def centre(self, X):
        check_is_fitted(self, "spline_")
        beta, sigma = self._split(X)
        return scad_estimate(beta, sigma, self.spline_.cfg)
