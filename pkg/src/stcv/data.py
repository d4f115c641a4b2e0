"""Marked space-time point pattern data model and loss functions.

A dataset is a spatial point pattern (locations with planar coordinates)
carrying, at each location, a time series of outcomes and a covariate
vector per (location, time) cell.  Outcomes may be missing; covariates of
a non-missing outcome must be complete.  Instances are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Location",
    "SpaceTimeDataset",
    "FoldAssignment",
    "LossValue",
    "DataError",
    "build_dataset",
    "mse_loss",
    "read_dataset_csv",
    "write_dataset_csv",
]


class DataError(ValueError):
    """Raised on invalid dataset construction or malformed input files."""


@dataclass(frozen=True)
class Location:
    """A spatial location: an opaque id plus planar coordinates."""

    id: object
    coords: tuple[float, float]

    def __post_init__(self):
        x, y = self.coords
        if not (np.isfinite(x) and np.isfinite(y)):
            raise DataError(f"non-finite coordinates for location {self.id!r}")


@dataclass(frozen=True)
class LossValue:
    """An aggregated non-negative loss over ``n`` test points."""

    value: float
    n: int

    def __post_init__(self):
        if self.value < 0 or not np.isfinite(self.value):
            raise DataError(f"loss value must be finite and >= 0, got {self.value}")
        if self.n < 1:
            raise DataError(f"loss count must be >= 1, got {self.n}")


class SpaceTimeDataset:
    """Immutable marked spatial point pattern.

    Internally stores outcomes as an (n_locations, n_times) array with NaN
    for missing cells, and covariates as (n_locations, n_times, p).  Usable
    observations (non-missing outcome cells) are enumerated in row-major
    (location, time) order; their flat indices are the observation indices
    used by fold assignments.
    """

    def __init__(self, locations, times, outcomes, covariates):
        locations = list(locations)
        if len(locations) < 2:
            raise DataError("dataset needs at least 2 locations")
        ids = [loc.id for loc in locations]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate location ids")
        times = np.asarray(times)
        if times.ndim != 1 or len(times) < 1:
            raise DataError("times must be a non-empty 1-d sequence")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise DataError("times must be strictly increasing")

        outcomes = np.asarray(outcomes, dtype=float)
        covariates = np.asarray(covariates, dtype=float)
        n, m = len(locations), len(times)
        if outcomes.shape != (n, m):
            raise DataError(f"outcomes shape {outcomes.shape} != ({n}, {m})")
        if covariates.ndim != 3 or covariates.shape[:2] != (n, m):
            raise DataError(f"covariates shape {covariates.shape} incompatible with ({n}, {m}, p)")

        obs_mask = np.isfinite(outcomes)
        bad = obs_mask & ~np.all(np.isfinite(covariates), axis=2)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise DataError(
                f"observation at ({ids[i]!r}, {times[j]!r}) has an incomplete covariate vector"
            )

        self.locations = tuple(locations)
        self.times = times
        self.times.setflags(write=False)
        self.outcomes = outcomes
        self.outcomes.setflags(write=False)
        self.covariates = covariates
        self.covariates.setflags(write=False)
        self.coords = np.array([loc.coords for loc in locations], dtype=float)
        self.coords.setflags(write=False)

        # flat (loc, time) index per usable observation, row-major
        li, ti = np.nonzero(obs_mask)
        self.obs_loc = li
        self.obs_time = ti
        self.obs_loc.setflags(write=False)
        self.obs_time.setflags(write=False)

    @property
    def n_locations(self):
        return len(self.locations)

    @property
    def n_times(self):
        return len(self.times)

    @property
    def p(self):
        return self.covariates.shape[2]

    @property
    def n_obs(self):
        """Number of usable (non-missing) observation cells."""
        return len(self.obs_loc)

    def obs_y(self, idx=None):
        """Outcome vector of the selected observations (all if idx is None)."""
        if idx is None:
            return self.outcomes[self.obs_loc, self.obs_time]
        idx = np.asarray(idx)
        return self.outcomes[self.obs_loc[idx], self.obs_time[idx]]

    def obs_X(self, idx=None):
        """Covariate matrix (k, p) of the selected observations."""
        if idx is None:
            return self.covariates[self.obs_loc, self.obs_time]
        idx = np.asarray(idx)
        return self.covariates[self.obs_loc[idx], self.obs_time[idx]]

    def obs_coords(self, idx=None):
        if idx is None:
            return self.coords[self.obs_loc]
        return self.coords[self.obs_loc[np.asarray(idx)]]

    def obs_times(self, idx=None):
        if idx is None:
            return self.times[self.obs_time]
        return self.times[self.obs_time[np.asarray(idx)]]

    def location_of_obs(self, idx):
        """Location index of each selected observation."""
        return self.obs_loc[np.asarray(idx)]

    def subset_locations(self, loc_idx):
        """New dataset restricted to the given location indices."""
        loc_idx = np.asarray(loc_idx)
        return SpaceTimeDataset(
            [self.locations[i] for i in loc_idx],
            self.times,
            self.outcomes[loc_idx],
            self.covariates[loc_idx],
        )


@dataclass(frozen=True)
class FoldAssignment:
    """A partition of observations (or locations) into disjoint test folds.

    ``folds[k]`` and ``training[k]`` are arrays of observation indices into
    the dataset's usable-observation enumeration.  ``unit`` records whether
    folds were dealt over observations or whole locations.  For buffered
    schemes ``training[k]`` may be an explicitly reduced set; otherwise it
    is the complement of ``folds[k]``.
    """

    folds: tuple
    training: tuple
    unit: str  # "observation" | "location"
    scheme: str = "custom"
    fold_locations: tuple | None = None  # per-fold location indices, location-unit schemes

    def __post_init__(self):
        if self.unit not in ("observation", "location"):
            raise DataError(f"unknown fold unit {self.unit!r}")
        seen = set()
        for k, f in enumerate(self.folds):
            s = set(np.asarray(f).tolist())
            if seen & s:
                raise DataError(f"fold {k} overlaps a previous test fold")
            seen |= s

    @property
    def n_folds(self):
        return len(self.folds)


def build_dataset(locations, times, outcome_table, covariate_table):
    """Assemble a validated dataset from tables keyed by (location id, time).

    ``locations`` is a sequence of ``Location`` (or (id, (x, y)) pairs),
    ``outcome_table`` maps (id, time) -> float or None (missing), and
    ``covariate_table`` maps (id, time) -> covariate sequence.  Cells absent
    from the outcome table are missing.  Duplicate keys and covariate length
    mismatches are rejected with the offending key named.
    """
    locs = []
    for loc in locations:
        if not isinstance(loc, Location):
            loc = Location(loc[0], tuple(loc[1]))
        locs.append(loc)
    times = np.asarray(times)
    loc_pos = {loc.id: i for i, loc in enumerate(locs)}
    time_pos = {t: j for j, t in enumerate(times.tolist())}

    items = outcome_table.items() if hasattr(outcome_table, "items") else list(outcome_table)

    p = None
    for key, vec in (covariate_table.items() if hasattr(covariate_table, "items") else covariate_table):
        p = len(vec)
        break
    if p is None:
        raise DataError("empty covariate table")

    n, m = len(locs), len(times)
    outcomes = np.full((n, m), np.nan)
    covariates = np.full((n, m, p), np.nan)
    seen = set()
    for (lid, t), y in items:
        if (lid, t) in seen:
            raise DataError(f"duplicate (location, time) key ({lid!r}, {t!r})")
        seen.add((lid, t))
        if lid not in loc_pos:
            raise DataError(f"unknown location id {lid!r}")
        if t not in time_pos:
            raise DataError(f"unknown time {t!r}")
        i, j = loc_pos[lid], time_pos[t]
        outcomes[i, j] = np.nan if y is None else y
    cov_items = covariate_table.items() if hasattr(covariate_table, "items") else covariate_table
    for (lid, t), vec in cov_items:
        if lid not in loc_pos or t not in time_pos:
            raise DataError(f"covariate row for unknown cell ({lid!r}, {t!r})")
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (p,):
            raise DataError(f"covariate length mismatch at ({lid!r}, {t!r}): got {vec.size}, want {p}")
        covariates[loc_pos[lid], time_pos[t]] = vec
    return SpaceTimeDataset(locs, times, outcomes, covariates)


def mse_loss(y_true, y_pred):
    """Mean squared error over paired sequences, as a LossValue."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size < 1:
        raise DataError(f"length mismatch or empty input: {y_true.shape} vs {y_pred.shape}")
    if not (np.all(np.isfinite(y_true)) and np.all(np.isfinite(y_pred))):
        raise DataError("non-finite input to mse_loss")
    d = y_true - y_pred
    return LossValue(float(np.mean(d * d)), len(y_true))


# --- CSV round trip ---------------------------------------------------------
# Header: location_id, x_coord, y_coord, time, y, x1..xp (missing y = empty).
# Finite values are printed at 17 significant digits so that the round trip
# is bit exact.

def _fmt(v):
    return f"{v:.17g}"


def write_dataset_csv(dataset, path_or_file, covariate_names=None):
    """Write a dataset in the long CSV format (one row per grid cell)."""
    p = dataset.p
    names = covariate_names or [f"x{j + 1}" for j in range(p)]
    if len(names) != p:
        raise DataError(f"{len(names)} covariate names for p={p}")

    def _write(f):
        w = csv.writer(f)
        w.writerow(["location_id", "x_coord", "y_coord", "time", "y"] + list(names))
        for i, loc in enumerate(dataset.locations):
            for j, t in enumerate(dataset.times):
                y = dataset.outcomes[i, j]
                row = [loc.id, _fmt(loc.coords[0]), _fmt(loc.coords[1]), _fmt(float(t))]
                row.append("" if not np.isfinite(y) else _fmt(y))
                row.extend(_fmt(v) for v in dataset.covariates[i, j])
                w.writerow(row)

    if isinstance(path_or_file, io.IOBase):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as f:
            _write(f)


def read_dataset_csv(path_or_file):
    """Read the long CSV format back into a dataset.

    Returns (dataset, covariate_names).  Malformed rows are reported with
    their line number.
    """

    def _read(f):
        r = csv.reader(f)
        header = next(r, None)
        if header is None or header[:5] != ["location_id", "x_coord", "y_coord", "time", "y"]:
            raise DataError("bad header: expected location_id,x_coord,y_coord,time,y,x1..xp")
        names = header[5:]
        p = len(names)
        loc_coords = {}
        cells = {}
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != 5 + p:
                raise DataError(f"line {lineno}: expected {5 + p} fields, got {len(row)}")
            try:
                lid = row[0]
                xy = (float(row[1]), float(row[2]))
                t = float(row[3])
                y = np.nan if row[4] == "" else float(row[4])
                xs = [float(v) for v in row[5:]]
            except ValueError as e:
                raise DataError(f"line {lineno}: {e}") from None
            if lid in loc_coords and loc_coords[lid] != xy:
                raise DataError(f"line {lineno}: location {lid!r} has conflicting coordinates")
            loc_coords[lid] = xy
            if (lid, t) in cells:
                raise DataError(f"line {lineno}: duplicate cell ({lid!r}, {t!r})")
            cells[(lid, t)] = (y, xs)
        if not cells:
            raise DataError("empty dataset file")
        lids = list(loc_coords)
        times = sorted({t for (_, t) in cells})
        n, m = len(lids), len(times)
        tpos = {t: j for j, t in enumerate(times)}
        lpos = {lid: i for i, lid in enumerate(lids)}
        outcomes = np.full((n, m), np.nan)
        covariates = np.full((n, m, p), np.nan)
        for (lid, t), (y, xs) in cells.items():
            outcomes[lpos[lid], tpos[t]] = y
            covariates[lpos[lid], tpos[t]] = xs
        locs = [Location(lid, loc_coords[lid]) for lid in lids]
        return SpaceTimeDataset(locs, np.array(times), outcomes, covariates), names

    if isinstance(path_or_file, io.IOBase):
        return _read(path_or_file)
    with open(path_or_file, newline="") as f:
        return _read(f)
