"""scikit-learn style wrapper around a single operator.

The operators approximate a known function rather than learn from data, so
``fit`` receives the function itself and ``predict`` evaluates ``Op f``::

    >>> est = OperatorApproximator(q=2.0, beta=1.0, n=64).fit(np.sin)
    >>> est.predict([[0.0], [0.5]])          # doctest: +SKIP
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .activation import ActivationParams, DensityKernel
from .operators import DIRECT, QUADRATURE, OperatorSpec, TargetFunction, apply
from .quadrature import QuadratureConfig


class OperatorApproximator(RegressorMixin, BaseEstimator):
    """Evaluate ``A_n f``, ``A*_n f`` or ``Ā_n f`` through the estimator API.

    Parameters
    ----------
    q, beta, base : float
        Activation parameters; ``base`` defaults to ``e``.
    kind : {"direct", "kantorovich", "quadrature"}
    n : int
        Scale of the operator.
    weights : sequence of float, optional
        Quadrature weights; only for ``kind="quadrature"`` (uniform with
        ``r = 4`` when omitted).
    tail_epsilon, rel_tol : float
        Quadrature controls.
    """

    def __init__(self, q=1.0, beta=1.0, base=math.e, kind=DIRECT, n=64, weights=None,
                 tail_epsilon=1e-12, rel_tol=1e-10):
        self.q = q
        self.beta = beta
        self.base = base
        self.kind = kind
        self.n = n
        self.weights = weights
        self.tail_epsilon = tail_epsilon
        self.rel_tol = rel_tol

    def fit(self, f, y=None, sup_norm=None):
        """Bind the target function.

        ``f`` is a :class:`TargetFunction` or a vectorized callable; for a
        plain callable ``sup_norm`` may be given (it only feeds error scales).
        ``y`` is ignored.
        """
        if isinstance(f, TargetFunction):
            target = f
        elif callable(f):
            target = TargetFunction(f, sup_norm=1.0 if sup_norm is None else float(sup_norm))
        else:
            raise TypeError("fit expects the target function, not data")
        weights = self.weights
        if self.kind == QUADRATURE and weights is None:
            weights = (0.25, 0.25, 0.25, 0.25)
        self.spec_ = OperatorSpec(self.kind, int(self.n), None if weights is None else tuple(weights))
        self.kernel_ = DensityKernel(ActivationParams(self.q, self.beta, self.base))
        self.config_ = QuadratureConfig(tail_epsilon=self.tail_epsilon, rel_tol=self.rel_tol)
        self.target_ = target
        self.n_features_in_ = 1
        return self

    def _points(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected one feature, got {X.shape[1]}")
            X = X[:, 0]
        return X

    def predict(self, X):
        """``Op f`` at the points of ``X`` (shape ``(m,)`` or ``(m, 1)``)."""
        check_is_fitted(self, "target_")
        return apply(self.target_, self.spec_, self._points(X), self.kernel_, self.config_)

    def transform(self, X):
        """Column-vector form of :meth:`predict`."""
        return self.predict(X)[:, None]

    def score(self, X, y=None, sample_weight=None):
        """Negative sup-grid error ``-max |Op f - f|``; ``y`` defaults to ``f(X)``."""
        xs = self._points(X)
        truth = self.target_(xs) if y is None else np.asarray(y, dtype=float).ravel()
        return -float(np.max(np.abs(self.predict(xs) - truth)))
