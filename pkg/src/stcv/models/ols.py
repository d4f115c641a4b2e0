"""Ordinary least squares with an intercept on the covariate vector."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..data import DataError

__all__ = ["OLSRule", "fit_ols"]


class ModelFitError(DataError):
    """Raised when a prediction rule cannot be fit."""


class OLSRule:
    """Fitted least-squares rule; predictions depend only on covariates."""

    kind = "ols"

    def __init__(self, beta):
        self.beta = np.asarray(beta, dtype=float)

    def predict(self, X, coords=None, times=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.beta) - 1:
            raise DataError(f"query covariate length {X.shape[1]} != {len(self.beta) - 1}")
        return self.beta[0] + X @ self.beta[1:]


def _design(X):
    return np.column_stack([np.ones(len(X)), X])


def fit_ols(dataset, idx=None):
    """Least-squares fit of outcome on intercept + covariates.

    Rejects rank-deficient designs, naming the collinear columns found by
    pivoted QR.
    """
    y = dataset.obs_y(idx)
    X = dataset.obs_X(idx)
    p = X.shape[1]
    if len(y) < p + 1:
        raise ModelFitError(f"need at least {p + 1} observations, got {len(y)}")
    A = _design(X)
    # pivoted QR exposes (near-)collinear columns through tiny R diagonals
    _, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * (diag[0] if diag[0] > 0 else 1.0)
    bad = piv[diag < tol]
    if len(bad):
        names = ["intercept" if j == 0 else f"x{j}" for j in sorted(bad)]
        raise ModelFitError(f"design matrix is rank deficient; collinear columns: {names}")
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return OLSRule(beta)
