"""Curve summaries: LOWESS, bootstrap bands and the KDE helper."""

import numpy as np
import pytest

from stcv.data import DataError
from stcv.summaries import bootstrap_bands, gaussian_kde_curve, lowess


class TestLowess:
    def test_reproduces_exact_line(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 10, 40)
        y = 2.0 - 0.7 * x
        grid, smooth = lowess(x, y, fraction=0.5)
        np.testing.assert_allclose(smooth, 2.0 - 0.7 * grid, atol=1e-8)

    def test_constant_y(self):
        x = np.linspace(0, 1, 20)
        _, smooth = lowess(x, np.full(20, 3.3), fraction=0.4)
        np.testing.assert_allclose(smooth, 3.3, atol=1e-12)

    def test_noisy_sine_smoothing_helps(self):
        rng = np.random.default_rng(4)
        x = np.sort(rng.uniform(0, 2 * np.pi, 150))
        truth = np.sin(x)
        y = truth + 0.4 * rng.normal(size=len(x))
        grid, smooth = lowess(x, y, fraction=0.3)
        truth_on_grid = np.sin(grid)
        rmse_raw = float(np.sqrt(np.mean((y - truth) ** 2)))
        rmse_smooth = float(np.sqrt(np.mean((smooth - truth_on_grid) ** 2)))
        assert rmse_smooth < rmse_raw

    def test_grid_is_sorted_unique_x(self):
        x = np.array([3.0, 1.0, 3.0, 2.0])
        y = np.array([1.0, 2.0, 1.0, 3.0])
        grid, smooth = lowess(x, y, fraction=1.0)
        np.testing.assert_array_equal(grid, [1.0, 2.0, 3.0])
        assert len(smooth) == 3

    def test_robustness_downweights_outlier(self):
        rng = np.random.default_rng(8)
        x = np.linspace(0, 10, 60)
        y = 1.0 + 0.5 * x + 0.05 * rng.normal(size=60)
        y[30] += 50.0  # gross outlier
        grid, robust = lowess(x, y, fraction=0.4, n_robust_iter=2)
        _, naive = lowess(x, y, fraction=0.4, n_robust_iter=0)
        truth = 1.0 + 0.5 * grid
        assert np.max(np.abs(robust - truth)) < np.max(np.abs(naive - truth))

    def test_degenerate_inputs(self):
        with pytest.raises(DataError):
            lowess([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(DataError):
            lowess([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(DataError):
            lowess([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], fraction=1.5)


class TestBootstrapBands:
    def test_identical_replicates_zero_width(self):
        curves = np.tile(np.array([1.0, 2.0, 3.0]), (6, 1))
        lo, med, hi = bootstrap_bands(curves, B=200, seed=0)
        np.testing.assert_allclose(lo, [1.0, 2.0, 3.0], atol=1e-14)
        np.testing.assert_allclose(hi - lo, 0.0, atol=1e-14)
        np.testing.assert_allclose(med, lo, atol=1e-14)

    def test_b1_is_single_resample_mean(self):
        curves = np.array([[0.0, 10.0], [2.0, 20.0], [4.0, 40.0]])
        seed = 5
        lo, med, hi = bootstrap_bands(curves, B=1, seed=seed)
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, 3, 3)
        expected = curves[rows].mean(axis=0)
        np.testing.assert_allclose(lo, expected)
        np.testing.assert_allclose(med, expected)
        np.testing.assert_allclose(hi, expected)

    def test_two_replicate_exact_enumeration(self):
        """With 2 replicates the resample mean has three atoms a, (a+b)/2, b
        with probabilities 1/4, 1/2, 1/4; bands must match that exact
        distribution."""
        a, b = 1.0, 3.0
        curves = np.array([[a], [b]])
        lo, med, hi = bootstrap_bands(curves, B=10_000, seed=42)
        assert abs(lo[0] - a) / abs(a) < 0.01
        assert abs(hi[0] - b) / abs(b) < 0.01
        assert abs(med[0] - (a + b) / 2) / abs((a + b) / 2) < 0.01

    def test_invalid_args(self):
        with pytest.raises(DataError):
            bootstrap_bands(np.ones((2, 3)), B=0)


class TestKde:
    def test_density_integrates_to_one(self):
        rng = np.random.default_rng(2)
        grid, dens = gaussian_kde_curve(rng.normal(size=400))
        assert float(np.trapezoid(dens, grid)) == pytest.approx(1.0, abs=0.01)

    def test_peak_near_center(self):
        rng = np.random.default_rng(3)
        grid, dens = gaussian_kde_curve(rng.normal(loc=5.0, scale=0.5, size=800))
        assert abs(grid[np.argmax(dens)] - 5.0) < 0.2

    def test_needs_two_values(self):
        with pytest.raises(DataError):
            gaussian_kde_curve([1.0])
