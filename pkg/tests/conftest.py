"""Shared fixtures: small deterministic datasets and simulated fields."""

import numpy as np
import pytest

from stcv.data import Location, SpaceTimeDataset
from stcv.simulate import GPSimConfig, simulate_replicate


def make_grid_dataset(n_locations=4, n_times=3, p=2, seed=0, missing=(),
                      outcome=None, coords=None):
    """Small complete dataset on integer coordinates with random covariates.

    ``missing`` is a collection of (location index, time index) cells whose
    outcome is set to NaN.  ``outcome`` may be a callable (i, j) -> value or a
    precomputed (n, m) array; the default is a seeded random field.
    """
    rng = np.random.default_rng(seed)
    if coords is None:
        coords = [(float(i % 2), float(i // 2)) for i in range(n_locations)]
    locations = [Location(f"s{i}", coords[i]) for i in range(n_locations)]
    times = np.arange(1.0, n_times + 1.0)
    covariates = rng.normal(size=(n_locations, n_times, p))
    if outcome is None:
        outcomes = rng.normal(size=(n_locations, n_times))
    elif callable(outcome):
        outcomes = np.array(
            [[outcome(i, j) for j in range(n_times)] for i in range(n_locations)],
            dtype=float,
        )
    else:
        outcomes = np.array(outcome, dtype=float)
    for i, j in missing:
        outcomes[i, j] = np.nan
    return SpaceTimeDataset(locations, times, outcomes, covariates)


@pytest.fixture(scope="session")
def small_field():
    """A small simulated field shared by tests that only need shapes and
    exact covariance bookkeeping (10x10 lattice, 6 days, 20 observed)."""
    cfg = GPSimConfig(grid_side=10, n_days=6, n_observed=20)
    return simulate_replicate(cfg, replicate_id=0, master_seed=42)


@pytest.fixture
def grid_dataset():
    return make_grid_dataset()
