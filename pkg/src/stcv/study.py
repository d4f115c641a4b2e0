"""Study orchestration: the simulation battery, the conditional-variance
profile run and the case-study pipeline.

Each unit of work (scenario x replicate) is self-contained and seeded from
(master seed, scenario, replicate), so units may run on a worker pool and
are merged in deterministic order regardless of completion order.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .condvar import conditional_variance_profile
from .data import DataError, SpaceTimeDataset, read_dataset_csv, write_dataset_csv
from .errors import cv_estimate, report_csv_rows, true_interpolation_error
from .models import ForestParams, KrigingConfig, ModelSpec
from .partition import (
    DEFAULT_BUFFER_FRACTIONS,
    domain_diameter,
    make_partition,
    PartitionSpec,
)
from .simulate import simulate_replicate

__all__ = [
    "EstimatorSpec",
    "StudyConfig",
    "CaseStudyConfig",
    "run_study",
    "run_condvar",
    "run_case_study",
    "make_case_study_fixture",
    "AGGREGATE_HEADER",
    "FOLDS_HEADER",
    "CONDVAR_HEADER",
]

AGGREGATE_HEADER = ["scenario", "replicate", "model", "estimator", "estimate", "n_folds", "n_test", "error"]
FOLDS_HEADER = ["estimator", "model", "scenario", "replicate", "fold", "loss", "n_test"]
CONDVAR_HEADER = ["scheme", "location_id", "time", "cond_var", "sq_error"]

BUFFER_NAMES = ("small", "medium", "large")


@dataclass(frozen=True)
class EstimatorSpec:
    """A CV estimator to run; buffered schemes size their buffer as a
    fraction of the dataset's spatial domain diameter."""

    scheme: str  # naive_kfold | llo_k | lolo | buffered
    K: int = 10
    buffer_fraction: float = 0.0
    name: str | None = None

    @property
    def label(self):
        if self.name:
            return self.name
        if self.scheme == "naive_kfold":
            return f"naive_cv{self.K}"
        if self.scheme == "llo_k":
            return f"llo_{self.K}"
        if self.scheme == "buffered":
            return f"buffered_{self.buffer_fraction:g}"
        return "lolo"

    def partition(self, dataset, seed):
        if self.scheme == "buffered":
            dist = self.buffer_fraction * domain_diameter(dataset)
            return make_partition(dataset, PartitionSpec("buffered", buffer_distance=dist))
        return make_partition(dataset, PartitionSpec(self.scheme, K=self.K, seed=seed))


def default_estimators(naive_k=10, llo_k=10, buffer_fractions=DEFAULT_BUFFER_FRACTIONS):
    ests = [
        EstimatorSpec("naive_kfold", K=naive_k),
        EstimatorSpec("llo_k", K=llo_k),
        EstimatorSpec("lolo"),
    ]
    for nm, f in zip(BUFFER_NAMES, buffer_fractions):
        ests.append(EstimatorSpec("buffered", buffer_fraction=f, name=f"buffered_{nm}"))
    return ests


def default_models(rf_trees=200, rf_min_leaf=3, kriging_tol=1e-4, kriging_sweeps=2):
    return [
        ModelSpec("ols"),
        ModelSpec("random_forest", forest=ForestParams(n_trees=rf_trees, min_leaf=rf_min_leaf)),
        ModelSpec("kriging", kriging=KrigingConfig(tol=kriging_tol, sweeps=kriging_sweeps)),
    ]


@dataclass(frozen=True)
class StudyConfig:
    scenarios: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    replicates: int = 20
    models: tuple = field(default_factory=lambda: tuple(default_models()))
    estimators: tuple = field(default_factory=lambda: tuple(default_estimators()))
    include_true_grid: bool = True
    bootstrap_B: int = 300
    lowess_fraction: float = 0.3
    master_seed: int = 20080620

    def __post_init__(self):
        if not self.scenarios or not self.models or not self.estimators:
            raise DataError("scenarios, models and estimators must be non-empty")
        if self.bootstrap_B < 1:
            raise DataError("bootstrap_B must be >= 1")
        if not 0 < self.lowess_fraction <= 1:
            raise DataError("lowess_fraction must lie in (0, 1]")


def _unit_seed(master_seed, scenario_id, replicate_id, tag):
    ss = np.random.SeedSequence([int(master_seed), int(scenario_id), int(replicate_id), int(tag)])
    return int(ss.generate_state(1)[0])


def _run_unit(config: StudyConfig, scenario_id, replicate_id):
    """One (scenario, replicate): simulate, fit, score every estimator.

    Returns (aggregate_rows, fold_rows, n_failures).
    """
    field_ = simulate_replicate(scenario_id, replicate_id, config.master_seed)
    obs = field_.observed_dataset()
    hold = field_.holdout_dataset()
    agg_rows, fold_rows, failures = [], [], 0

    for model in config.models:
        if config.include_true_grid:
            try:
                rule = model.fit(obs, seed=_unit_seed(config.master_seed, scenario_id, replicate_id, 0))
                rep = true_interpolation_error(rule, hold, train_coords=obs.coords)
                agg_rows.append([scenario_id, replicate_id, model.kind, "true_grid",
                                 f"{rep.estimate:.17g}", 1, hold.n_obs, ""])
                fold_rows.extend(report_csv_rows(rep, model.kind, scenario_id, replicate_id))
            except Exception as e:
                failures += 1
                agg_rows.append([scenario_id, replicate_id, model.kind, "true_grid",
                                 "", "", "", str(e)])
        for j, est in enumerate(config.estimators, start=1):
            try:
                pseed = _unit_seed(config.master_seed, scenario_id, replicate_id, 100 + j)
                part = est.partition(obs, pseed)
                rep = cv_estimate(obs, part, model, seed=pseed, label=est.label)
                n_test = sum(lv.n for _, lv in rep.per_fold_losses)
                agg_rows.append([scenario_id, replicate_id, model.kind, est.label,
                                 f"{rep.estimate:.17g}", part.n_folds, n_test, ""])
                fold_rows.extend(report_csv_rows(rep, model.kind, scenario_id, replicate_id))
            except Exception as e:
                failures += 1
                agg_rows.append([scenario_id, replicate_id, model.kind, est.label,
                                 "", "", "", str(e)])
    return agg_rows, fold_rows, failures


def run_study(config: StudyConfig, out_dir, threads=1):
    """Run the scenario battery and write aggregate.csv / folds.csv.

    Returns the number of per-row failures (0 means full success).
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    units = [(s, r) for s in config.scenarios for r in range(config.replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_unit, [config] * len(units),
                                    [u[0] for u in units], [u[1] for u in units]))
    else:
        results = [_run_unit(config, s, r) for s, r in units]

    failures = 0
    with open(os.path.join(out_dir, "aggregate.csv"), "w", newline="") as fa, \
         open(os.path.join(out_dir, "folds.csv"), "w", newline="") as ff:
        wa = csv.writer(fa)
        wf = csv.writer(ff)
        wa.writerow(AGGREGATE_HEADER)
        wf.writerow(FOLDS_HEADER)
        for agg, folds, nf in results:
            failures += nf
            wa.writerows(agg)
            wf.writerows(folds)
    return failures


# --- conditional variance profile run --------------------------------------

def run_condvar(scenario_id, replicate_id, master_seed, model: ModelSpec,
                estimators=None, out_path=None, include_true_grid=True):
    """Per-cell conditional variance and squared prediction error for each
    scheme on one simulated replicate.  Returns the condvar.csv rows."""
    field_ = simulate_replicate(scenario_id, replicate_id, master_seed)
    obs = field_.observed_dataset()
    rows = []
    estimators = default_estimators() if estimators is None else estimators

    if include_true_grid:
        hold = field_.holdout_dataset()
        rule = model.fit(obs, seed=_unit_seed(master_seed, scenario_id, replicate_id, 0))
        pred = rule.predict(hold.obs_X(), hold.obs_coords(), hold.obs_times())
        errs = (hold.obs_y() - pred) ** 2
        prof = conditional_variance_profile(field_, "true_grid")
        # profile cells are (holdout location x all times) in the same
        # row-major order as the holdout dataset enumeration
        for loc, t, cv, e in zip(prof.location_idx, prof.times, prof.cond_var, errs):
            rows.append(["true_grid", int(loc), f"{t:.17g}", f"{cv:.17g}", f"{e:.17g}"])

    glob_loc = field_.observed_idx[obs.obs_loc]
    for j, est in enumerate(estimators, start=1):
        pseed = _unit_seed(master_seed, scenario_id, replicate_id, 100 + j)
        part = est.partition(obs, pseed)
        prof = conditional_variance_profile(field_, part)
        k = 0
        for fold_id in range(part.n_folds):
            test = np.asarray(part.folds[fold_id])
            train = np.asarray(part.training[fold_id])
            fseed = int(np.random.SeedSequence([pseed, int(np.min(test))]).generate_state(1)[0])
            rule = model.fit(obs, idx=train, seed=fseed)
            pred = rule.predict(obs.obs_X(test), obs.obs_coords(test), obs.obs_times(test))
            errs = (obs.obs_y(test) - pred) ** 2
            for i in range(len(test)):
                rows.append([est.label, int(glob_loc[test[i]]),
                             f"{prof.times[k]:.17g}", f"{prof.cond_var[k]:.17g}",
                             f"{errs[i]:.17g}"])
                k += 1
    if out_path is not None:
        with open(out_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CONDVAR_HEADER)
            w.writerows(rows)
    return rows


# --- case study -------------------------------------------------------------

CASE_AGG_HEADER = ["interval_weeks", "block", "start_day", "model", "estimator",
                   "estimate", "n_locations", "error"]
WEEKLY_HEADER = ["week", "start_day", "model", "estimator", "estimate", "n_locations"]


@dataclass(frozen=True)
class CaseStudyConfig:
    input_csv: str
    interval_weeks: tuple = (1, 2, 4, 8)
    pollutant: str = "pollutant"
    models: tuple = field(default_factory=lambda: tuple(default_models()))
    estimators: tuple = field(
        default_factory=lambda: (
            EstimatorSpec("naive_kfold", K=10),
            EstimatorSpec("llo_k", K=10),
            EstimatorSpec("lolo"),
        )
    )
    min_locations: int = 10
    master_seed: int = 20080620


def _time_window(dataset, t_lo, t_hi):
    """Dataset restricted to times in [t_lo, t_hi), dropping locations left
    with no usable observation.  Returns None if fewer than 2 remain."""
    tmask = (dataset.times >= t_lo) & (dataset.times < t_hi)
    if not np.any(tmask):
        return None
    out = dataset.outcomes[:, tmask]
    keep = np.nonzero(np.any(np.isfinite(out), axis=1))[0]
    if len(keep) < 2:
        return None
    return SpaceTimeDataset(
        [dataset.locations[i] for i in keep],
        dataset.times[tmask],
        out[keep],
        dataset.covariates[np.ix_(keep, np.nonzero(tmask)[0])],
    )


def run_case_study(config: CaseStudyConfig, out_dir):
    """Run the interval battery on a case-study CSV; writes case study
    aggregate.csv and weekly.csv.  Returns the number of failed rows."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    dataset, _ = read_dataset_csv(config.input_csv)
    t0 = float(dataset.times.min())
    t_end = float(dataset.times.max())
    n_weeks = int(math.floor((t_end - t0) / 7.0)) + 1

    agg_rows, weekly_rows, failures = [], [], 0
    for w in config.interval_weeks:
        n_blocks = max(1, n_weeks // w)
        for b in range(n_blocks):
            lo = t0 + b * w * 7
            hi = lo + w * 7
            sub = _time_window(dataset, lo, hi)
            if sub is None or sub.n_locations < config.min_locations:
                warnings.warn(
                    f"interval {w}w block {b} has too few locations; skipped"
                )
                continue
            for model in config.models:
                for j, est in enumerate(config.estimators, start=1):
                    try:
                        pseed = _unit_seed(config.master_seed, w, b, 100 + j)
                        part = est.partition(sub, pseed)
                        rep = cv_estimate(sub, part, model, seed=pseed, label=est.label)
                        row = [w, b, f"{lo:.17g}", model.kind, est.label,
                               f"{rep.estimate:.17g}", sub.n_locations, ""]
                    except Exception as e:
                        failures += 1
                        row = [w, b, f"{lo:.17g}", model.kind, est.label, "",
                               sub.n_locations, str(e)]
                    agg_rows.append(row)
                    if w == 1:
                        weekly_rows.append([b, f"{lo:.17g}", model.kind, est.label,
                                            row[5], sub.n_locations])

    with open(os.path.join(out_dir, "aggregate.csv"), "w", newline="") as f:
        wcsv = csv.writer(f)
        wcsv.writerow(CASE_AGG_HEADER)
        wcsv.writerows(agg_rows)
    with open(os.path.join(out_dir, "weekly.csv"), "w", newline="") as f:
        wcsv = csv.writer(f)
        wcsv.writerow(WEEKLY_HEADER)
        wcsv.writerows(weekly_rows)
    return failures


# --- synthetic case-study fixture -------------------------------------------

FIXTURE_COVARIATES = [
    "monitor_latitude",
    "monitor_longitude",
    "date_julian",
    "elevation_m",
    "dew_point_k",
    "boundary_layer_height_m",
    "surface_pressure_pa",
    "relative_humidity_pct",
    "temperature_2m_k",
    "wind_u_ms",
    "wind_v_ms",
    "inv_dist_fire_per_m",
    "traffic_1km",
    "agricultural_land_pct",
    "urban_land_pct",
    "vegetation_land_pct",
    "ndvi",
    "no2_log_molec_cm2",
    "wrf_chem_co_logmol_day",
    "wrf_chem_pm25_logkg_day",
    "wrf_chem_ozone_log8hrmax",
]


def make_case_study_fixture(path, n_monitors=30, n_weeks=22, seed=2008,
                            missing_rate=0.03):
    """Write a synthetic monitor-network CSV with the case-study covariate
    schema.

    The outcome is dominated by a strongly dependent space-time field plus a
    linear signal on two covariates, and the monitor coordinates and date are
    included among the covariates.  Under naive CV a flexible model can
    exploit same-location rows through those columns, while under LOLO it
    cannot and the linear model pulls ahead: model rankings flip between the
    two estimators.
    """
    from .simulate import sq_exp_covariance, _chol

    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 100.0, size=(n_monitors, 2))  # projected km
    n_days = n_weeks * 7
    times = np.arange(n_days, dtype=float)

    # strongly dependent separable field: corr 0.5 at 30 km and at 2 days
    v_s = 30.0 / math.sqrt(math.log(2.0))
    v_t = 2.0 / math.sqrt(math.log(2.0))
    S = sq_exp_covariance(coords, v_s, 1e-6)
    T = sq_exp_covariance(times.reshape(-1, 1), v_t, 1e-6)
    Ls, Lt = _chol(S), _chol(T)
    fld = Ls @ rng.standard_normal((n_monitors, n_days)) @ Lt.T

    p = len(FIXTURE_COVARIATES)
    X = np.empty((n_monitors, n_days, p))
    X[:, :, 0] = coords[:, 0:1]
    X[:, :, 1] = coords[:, 1:2]
    X[:, :, 2] = times[None, :]
    static = rng.normal(size=(n_monitors, p))
    for j in range(3, p):
        # static site character plus day-to-day weather noise
        X[:, :, j] = static[:, j:j + 1] + 0.5 * rng.normal(size=(n_monitors, n_days))
    # moderate linear signal on two physical columns; the field still dominates
    y = 1.2 * fld + 0.6 * X[:, :, 4] + 0.6 * X[:, :, 8] + 0.05 * rng.normal(size=fld.shape)
    y[rng.random(y.shape) < missing_rate] = np.nan

    locs = [(f"m{i:03d}", (coords[i, 0], coords[i, 1])) for i in range(n_monitors)]
    from .data import build_dataset

    outcome = {}
    covs = {}
    for i, (lid, _) in enumerate(locs):
        for j, t in enumerate(times):
            key = (lid, float(t))
            outcome[key] = None if not np.isfinite(y[i, j]) else float(y[i, j])
            covs[key] = X[i, j]
    ds = build_dataset(locs, times, outcome, covs)
    write_dataset_csv(ds, path, covariate_names=FIXTURE_COVARIATES)
    return path
