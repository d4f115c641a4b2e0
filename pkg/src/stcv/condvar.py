"""Exact conditional variance of held-out field values given training cells.

In simulation the generating covariance is known exactly, so the variance of
any test cell conditional on any training set is the diagonal of a Schur
complement.  This quantifies how informative each cross-validation scheme's
training data is about its test points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import DataError

__all__ = ["ConditionalVarianceResult", "conditional_covariance", "conditional_variance_profile"]


@dataclass(frozen=True)
class ConditionalVarianceResult:
    """Per-test-cell conditional variances with their (location, time) map."""

    location_idx: np.ndarray  # global location index per test cell
    times: np.ndarray  # time value per test cell
    cond_var: np.ndarray
    scheme: str = ""


def _spd_cholesky(M, jitter=1e-10):
    scale = float(np.mean(np.diag(M)))
    j = 0.0
    for _ in range(7):
        try:
            return np.linalg.cholesky(M + j * scale * np.eye(len(M)) if j else M)
        except np.linalg.LinAlgError:
            j = jitter if j == 0.0 else j * 10.0
    raise DataError("conditioning block is not positive definite after jitter")


def conditional_covariance(full_cov, star_idx, c_idx):
    """Schur complement: covariance of the ``star`` block given the ``c``
    block, computed through a Cholesky factorization (no explicit inverse)."""
    full_cov = np.asarray(full_cov, dtype=float)
    star_idx = np.asarray(star_idx)
    c_idx = np.asarray(c_idx)
    if len(np.intersect1d(star_idx, c_idx)):
        raise DataError("star and conditioning index sets overlap")
    S_ss = full_cov[np.ix_(star_idx, star_idx)]
    S_sc = full_cov[np.ix_(star_idx, c_idx)]
    S_cc = full_cov[np.ix_(c_idx, c_idx)]
    L = _spd_cholesky(S_cc)
    W = scipy.linalg.solve_triangular(L, S_sc.T, lower=True)
    out = S_ss - W.T @ W
    return 0.5 * (out + out.T)


def _cond_var_diag(S, T, test_cells, train_cells):
    """Diagonal conditional variance of test cells given training cells.

    ``S`` and ``T`` are the spatial and temporal correlation factors (with
    jitter); a cell is (location index, time index) and its covariance with
    another cell is the product of the factor entries.
    """
    tl, tt = test_cells
    cl, ct = train_cells
    var = S[tl, tl] * T[tt, tt]
    if len(cl) == 0:
        return var
    C_cc = S[np.ix_(cl, cl)] * T[np.ix_(ct, ct)]
    C_ct = S[np.ix_(cl, tl)] * T[np.ix_(ct, tt)]
    L = _spd_cholesky(C_cc)
    W = scipy.linalg.solve_triangular(L, C_ct, lower=True)
    return var - np.sum(W * W, axis=0)


def conditional_variance_profile(field, scheme):
    """Conditional variance of every test cell under a CV fold assignment
    (on the observed dataset) or under the true-grid split.

    ``scheme`` is either a FoldAssignment built on ``field.observed_dataset()``
    or the string ``"true_grid"``.  Uses the exact generating covariance of
    the simulated field.
    """
    S = field.spatial_corr()
    T = field.temporal_corr()
    n_times = len(field.times)

    if isinstance(scheme, str):
        if scheme != "true_grid":
            raise DataError(f"unknown scheme {scheme!r}")
        hold = field.holdout_idx
        obs = field.observed_idx
        tl = np.repeat(hold, n_times)
        tt = np.tile(np.arange(n_times), len(hold))
        cl = np.repeat(obs, n_times)
        ct = np.tile(np.arange(n_times), len(obs))
        cv = _cond_var_diag(S, T, (tl, tt), (cl, ct))
        return ConditionalVarianceResult(tl, field.times[tt], cv, scheme="true_grid")

    obs_ds = field.observed_dataset()
    # map observed-dataset observation indices to global (location, time)
    glob_loc = field.observed_idx[obs_ds.obs_loc]
    time_idx = obs_ds.obs_time
    locs, times, cvs = [], [], []
    for k in range(scheme.n_folds):
        test = np.asarray(scheme.folds[k])
        train = np.asarray(scheme.training[k])
        cv = _cond_var_diag(
            S, T,
            (glob_loc[test], time_idx[test]),
            (glob_loc[train], time_idx[train]),
        )
        locs.append(glob_loc[test])
        times.append(field.times[time_idx[test]])
        cvs.append(cv)
    return ConditionalVarianceResult(
        np.concatenate(locs), np.concatenate(times), np.concatenate(cvs),
        scheme=getattr(scheme, "scheme", "custom"),
    )
