"""scikit-learn style front end.

``fit(X)`` takes either candidate points, shape ``(n, m)``, whose information
atoms are ``x x^T``, or the atoms themselves, shape ``(n, m, m)``.  The fitted
design is exposed as ``weights_``.

>>> import numpy as np
>>> from optdesign.estimator import IPDesign
>>> s = np.linspace(0, 1, 50)
>>> est = IPDesign(criterion="D").fit(np.column_stack([np.ones_like(s), s]))
>>> sorted(est.support_.tolist())
[0, 49]
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import criteria, ipsolver, multsolver
from .criteria import CriterionSpec
from .problem import DesignProblem, DesignSpace, assemble, from_matrices


class _DesignEstimator(BaseEstimator):
    """Shared input handling; subclasses define ``_solve``."""

    def _spec(self, m: int) -> CriterionSpec:
        return CriterionSpec.make(self.criterion, m, self.K, self.p)

    def _problem(self, X) -> DesignProblem:
        X = np.asarray(X)
        if X.ndim == 3:
            A = check_array(X, allow_nd=True, dtype=np.float64, ensure_min_samples=1)
            return from_matrices(A, self._spec(A.shape[1]))
        pts = check_array(X, dtype=np.float64, ensure_min_samples=1)
        return assemble(DesignSpace(pts), self._spec(pts.shape[1]))

    def fit(self, X, y=None):
        """Compute the optimal weights over the rows (or atoms) of ``X``; ``y`` is ignored."""
        problem = self._problem(X)
        report = self._solve(problem)
        self.n_features_in_ = problem.m
        self.report_ = report
        self.weights_ = report.weights
        self.objective_ = report.objective
        self.support_ = report.support
        return self

    def design_value(self, X) -> float:
        """Criterion value of the fitted weights on ``X`` (same candidates as in fit)."""
        check_is_fitted(self, "weights_")
        problem = self._problem(X)
        if problem.n != self.weights_.size:
            raise ValueError(f"X has {problem.n} candidates but the design was fit on {self.weights_.size}")
        return criteria.value(problem.criterion, problem.moment_matrix(self.weights_))

    def score(self, X, y=None) -> float:
        """Negated criterion value, so that larger is better."""
        return -self.design_value(X)


class IPDesign(_DesignEstimator):
    """Optimal design by the primal log-barrier interior-point method.

    Parameters
    ----------
    criterion : {"A", "c", "D", "pmean"}
    p : float, optional
        Order of the p-th mean criterion; required for ``"pmean"``.
    K : array of shape (m, k), optional
        Linear combination of interest; the identity when omitted.
    mu1, gamma : float
        Initial barrier parameter and its reduction factor.
    mu_stop : float
        Smallest barrier parameter.
    """

    def __init__(self, criterion="D", p=None, K=None, mu1=10.0, gamma=0.5, mu_stop=1e-10):
        self.criterion = criterion
        self.p = p
        self.K = K
        self.mu1 = mu1
        self.gamma = gamma
        self.mu_stop = mu_stop

    def _solve(self, problem):
        config = ipsolver.IPConfig(mu1=self.mu1, gamma=self.gamma, mu_stop=self.mu_stop)
        return ipsolver.solve(problem, config)


class MultiplicativeDesign(_DesignEstimator):
    """Optimal design by the multiplicative algorithm.

    For ``p < -1`` the iterates need not descend; ``use_best`` then reports the
    best iterate instead of the last one.
    """

    def __init__(self, criterion="D", p=None, K=None, lam=1.0, delta=2e-4, max_iters=10000, use_best=True):
        self.criterion = criterion
        self.p = p
        self.K = K
        self.lam = lam
        self.delta = delta
        self.max_iters = max_iters
        self.use_best = use_best

    def _solve(self, problem):
        config = multsolver.MultConfig(lam=self.lam, delta=self.delta, max_iters=self.max_iters,
                                       track_minimum=self.use_best)
        report = multsolver.solve(problem, config)
        if self.use_best and report.best_objective is not None and report.best_objective < report.objective:
            report.weights, report.objective = report.best_weights, report.best_objective
        return report
