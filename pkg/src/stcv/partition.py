"""Fold constructors: naive K-fold, K-fold leave-location-out, LOLO and
spatially buffered location-wise cross-validation.

All schemes are pure functions of (dataset, parameters, seed) and return an
immutable :class:`~stcv.data.FoldAssignment`.  Randomized schemes shuffle
with a Fisher-Yates permutation driven by numpy's PCG64 generator so that
assignments are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError, FoldAssignment

__all__ = [
    "PartitionSpec",
    "naive_kfold",
    "llo_k",
    "lolo",
    "buffered_llo",
    "default_buffer_distances",
    "make_partition",
]

#: default buffer sizes as fractions of the spatial domain diameter
DEFAULT_BUFFER_FRACTIONS = (0.05, 0.15, 0.30)


@dataclass(frozen=True)
class PartitionSpec:
    """Declarative description of a partitioning scheme."""

    scheme: str  # naive_kfold | llo_k | lolo | buffered
    K: int = 10
    buffer_distance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("naive_kfold", "llo_k", "lolo", "buffered"):
            raise DataError(f"unknown partition scheme {self.scheme!r}")
        if self.scheme in ("naive_kfold", "llo_k") and self.K < 2:
            raise DataError(f"K must be >= 2, got {self.K}")
        if self.buffer_distance < 0:
            raise DataError("buffer_distance must be >= 0")

    @property
    def label(self):
        if self.scheme == "naive_kfold":
            return f"naive_cv{self.K}"
        if self.scheme == "llo_k":
            return f"llo_{self.K}"
        if self.scheme == "buffered":
            return f"buffered_{self.buffer_distance:g}"
        return "lolo"


def _deal(order, K):
    """Split a permuted index array into K contiguous chunks whose sizes
    differ by at most one (the first n % K chunks get the extra item)."""
    n = len(order)
    sizes = np.full(K, n // K)
    sizes[: n % K] += 1
    out = []
    start = 0
    for sz in sizes:
        out.append(np.sort(order[start : start + sz]))
        start += sz
    return out


def naive_kfold(dataset, K, seed=0):
    """Unstructured K-fold partition of the usable observations."""
    n_obs = dataset.n_obs
    if not 2 <= K <= n_obs:
        raise DataError(f"K={K} out of range [2, {n_obs}]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_obs)
    folds = _deal(order, K)
    all_idx = np.arange(n_obs)
    training = tuple(np.setdiff1d(all_idx, f, assume_unique=True) for f in folds)
    return FoldAssignment(tuple(folds), training, "observation", scheme="naive_kfold")


def _location_folds(dataset, loc_groups, training_locs=None, scheme="llo_k"):
    """Build an observation-level FoldAssignment from location groups."""
    all_idx = np.arange(dataset.n_obs)
    obs_loc = dataset.obs_loc
    folds, training = [], []
    for k, locs in enumerate(loc_groups):
        test_mask = np.isin(obs_loc, locs)
        folds.append(all_idx[test_mask])
        if training_locs is None:
            training.append(all_idx[~test_mask])
        else:
            training.append(all_idx[np.isin(obs_loc, training_locs[k])])
    return FoldAssignment(
        tuple(folds),
        tuple(training),
        "location",
        scheme=scheme,
        fold_locations=tuple(np.asarray(g) for g in loc_groups),
    )


def llo_k(dataset, K, seed=0):
    """K-fold leave-location-out: locations (not observations) are dealt
    into K balanced spatial folds; each fold tests every observation at
    its locations."""
    n = dataset.n_locations
    if not 2 <= K <= n:
        raise DataError(f"K={K} out of range [2, {n}]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    groups = _deal(order, K)
    return _location_folds(dataset, groups, scheme="llo_k")


def lolo(dataset):
    """Leave-one-location-out: one fold per location, deterministic order."""
    n = dataset.n_locations
    if n < 2:
        raise DataError("lolo needs at least 2 locations")
    groups = [np.array([i]) for i in range(n)]
    return _location_folds(dataset, groups, scheme="lolo")


def buffered_llo(dataset, buffer_distance):
    """Location-wise CV with a spatial buffer: fold i tests location i and
    trains only on locations strictly farther than ``buffer_distance``."""
    if buffer_distance < 0:
        raise DataError("buffer_distance must be >= 0")
    n = dataset.n_locations
    if n < 2:
        raise DataError("buffered_llo needs at least 2 locations")
    coords = dataset.coords
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
    groups, train_locs = [], []
    for i in range(n):
        far = np.nonzero(d[i] > buffer_distance)[0]
        far = far[far != i]
        if len(far) == 0:
            raise DataError(
                f"buffer {buffer_distance:g} leaves no training locations for "
                f"location {dataset.locations[i].id!r}"
            )
        groups.append(np.array([i]))
        train_locs.append(far)
    return _location_folds(dataset, groups, training_locs=train_locs, scheme="buffered")


def domain_diameter(dataset):
    """Largest pairwise Euclidean distance between dataset locations."""
    coords = dataset.coords
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
    return float(d.max())


def default_buffer_distances(dataset, fractions=DEFAULT_BUFFER_FRACTIONS):
    """Small/medium/large buffers as fractions of the domain diameter."""
    diam = domain_diameter(dataset)
    return tuple(f * diam for f in fractions)


def make_partition(dataset, spec: PartitionSpec):
    """Instantiate a PartitionSpec against a dataset."""
    if spec.scheme == "naive_kfold":
        return naive_kfold(dataset, spec.K, spec.seed)
    if spec.scheme == "llo_k":
        return llo_k(dataset, spec.K, spec.seed)
    if spec.scheme == "lolo":
        return lolo(dataset)
    return buffered_llo(dataset, spec.buffer_distance)
