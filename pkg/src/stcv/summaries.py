"""Curve summaries for the report pipeline: LOWESS smoothing, pointwise
bootstrap confidence bands and a Gaussian kernel density with Silverman
bandwidth."""

from __future__ import annotations

import numpy as np

from .data import DataError

__all__ = ["lowess", "bootstrap_bands", "gaussian_kde_curve"]


def lowess(x, y, fraction=2.0 / 3.0, n_robust_iter=2):
    """Locally weighted linear regression with tricube weights.

    Runs ``n_robust_iter`` bisquare robustness iterations and evaluates the
    smooth at the sorted unique x values.  Returns (grid, smoothed).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise DataError("lowess needs matched 1-d x, y with at least 3 points")
    if not 0 < fraction <= 1:
        raise DataError("fraction must lie in (0, 1]")
    grid = np.unique(x)
    if len(grid) < 2:
        raise DataError("degenerate input: all x equal")

    n = len(x)
    r = max(2, int(np.ceil(fraction * n)))
    delta = np.ones(n)
    fitted_grid = np.empty(len(grid))
    for _ in range(n_robust_iter + 1):
        fitted = np.empty(n)
        for arr_out, xs in ((fitted, x), (fitted_grid, grid)):
            for i, x0 in enumerate(xs):
                d = np.abs(x - x0)
                h = np.partition(d, r - 1)[r - 1]
                if h <= 0:
                    h = np.max(d) if np.max(d) > 0 else 1.0
                w = np.clip(d / h, 0.0, 1.0)
                w = (1.0 - w**3) ** 3 * delta
                sw = np.sum(w)
                if sw <= 0:
                    arr_out[i] = np.mean(y)
                    continue
                xm = np.sum(w * x) / sw
                ym = np.sum(w * y) / sw
                sxx = np.sum(w * (x - xm) ** 2)
                b = np.sum(w * (x - xm) * (y - ym)) / sxx if sxx > 1e-300 else 0.0
                arr_out[i] = ym + b * (x0 - xm)
        resid = y - fitted
        s = np.median(np.abs(resid))
        if s <= 0:
            break
        delta = np.clip(resid / (6.0 * s), -1.0, 1.0)
        delta = (1.0 - delta**2) ** 2
    return grid, fitted_grid


def bootstrap_bands(curves, B, seed=0, quantiles=(2.5, 50.0, 97.5)):
    """Pointwise bootstrap bands over replicate curves.

    ``curves`` is (n_replicates, n_points); replicates are resampled with
    replacement B times and the pointwise mean of each resample summarized
    by the requested percentiles.  Returns (len(quantiles), n_points).
    """
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    n = curves.shape[0]
    if n < 1 or B < 1:
        raise DataError("need at least one replicate and B >= 1")
    rng = np.random.default_rng(seed)
    stats = np.empty((B, curves.shape[1]))
    for b in range(B):
        rows = rng.integers(0, n, n)
        stats[b] = curves[rows].mean(axis=0)
    return np.percentile(stats, quantiles, axis=0)


def gaussian_kde_curve(values, grid=None, n_grid=200):
    """Gaussian kernel density with Silverman's bandwidth rule."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DataError("kde needs at least 2 values")
    sd = np.std(values, ddof=1)
    iqr = np.subtract(*np.percentile(values, [75, 25]))
    scale = min(sd, iqr / 1.349) if iqr > 0 else sd
    if scale <= 0:
        scale = max(abs(values[0]), 1.0) * 1e-3
    h = 0.9 * scale * len(values) ** (-0.2)
    if grid is None:
        lo, hi = values.min() - 3 * h, values.max() + 3 * h
        grid = np.linspace(lo, hi, n_grid)
    z = (grid[:, None] - values[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(values) * h * np.sqrt(2 * np.pi))
    return grid, dens
