"""Configuration file handling (INI-style key/value sections)."""

from __future__ import annotations

import configparser

from .data import DataError
from .models import ForestParams, KrigingConfig, ModelSpec
from .study import CaseStudyConfig, EstimatorSpec, StudyConfig, BUFFER_NAMES

__all__ = ["CONFIG_SCHEMA", "load_study_config", "load_case_study_config"]

CONFIG_SCHEMA = """\
# stcv configuration file (INI format). All keys are optional unless noted.

[study]
scenarios = 1,2,3,4,5,6,7,8   # scenario ids from the 8-row battery
replicates = 20               # replicates per scenario
master_seed = 20080620
bootstrap_b = 300             # resamples for confidence bands
lowess_fraction = 0.3         # smoothing span for error-vs-variance curves

[models]
use = ols,random_forest,kriging
rf_trees = 200
rf_mtry =                     # empty = ceil(p / 3)
rf_min_leaf = 3
rf_max_depth =                # empty = unlimited
kriging_tol = 1e-4            # golden-section tolerance in log-parameters
kriging_sweeps = 2            # coordinate-descent sweeps

[estimators]
true_grid = true              # also compute the true holdout error (simulation only)
naive_k = 10                  # K for naive K-fold; 0 disables
llo_k = 10                    # K for leave-location-out K-fold; 0 disables
lolo = true
buffered_fractions = 0.05,0.15,0.30   # buffer sizes as fractions of the domain diameter

[case_study]
input_csv =                   # REQUIRED for the case-study command
interval_weeks = 1,2,4,8
pollutant = pollutant
min_locations = 10
"""


def _ints(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _floats(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _parse(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        read = cp.read(path)
        if not read:
            raise DataError(f"config file not found: {path}")
    return cp


def _models_from(cp):
    sec = cp["models"] if cp.has_section("models") else {}
    use = [m.strip() for m in sec.get("use", "ols,random_forest,kriging").split(",") if m.strip()]
    mtry = sec.get("rf_mtry", "") if hasattr(sec, "get") else ""
    depth = sec.get("rf_max_depth", "") if hasattr(sec, "get") else ""
    forest = ForestParams(
        n_trees=int(sec.get("rf_trees", 200)),
        mtry=int(mtry) if str(mtry).strip() else None,
        min_leaf=int(sec.get("rf_min_leaf", 3)),
        max_depth=int(depth) if str(depth).strip() else None,
    )
    krig = KrigingConfig(
        tol=float(sec.get("kriging_tol", 1e-4)),
        sweeps=int(sec.get("kriging_sweeps", 2)),
    )
    return tuple(ModelSpec(m, forest=forest, kriging=krig) for m in use)


def _estimators_from(cp):
    sec = cp["estimators"] if cp.has_section("estimators") else {}
    ests = []
    naive_k = int(sec.get("naive_k", 10))
    if naive_k:
        ests.append(EstimatorSpec("naive_kfold", K=naive_k))
    llo = int(sec.get("llo_k", 10))
    if llo:
        ests.append(EstimatorSpec("llo_k", K=llo))
    if str(sec.get("lolo", "true")).lower() in ("1", "true", "yes"):
        ests.append(EstimatorSpec("lolo"))
    fracs = _floats(sec.get("buffered_fractions", "0.05,0.15,0.30"))
    for nm, f in zip(BUFFER_NAMES, fracs):
        ests.append(EstimatorSpec("buffered", buffer_fraction=f, name=f"buffered_{nm}"))
    include_truth = str(sec.get("true_grid", "true")).lower() in ("1", "true", "yes")
    return tuple(ests), include_truth


def load_study_config(path=None, **overrides):
    """Build a StudyConfig from an INI file plus keyword overrides
    (scenarios, replicates, master_seed)."""
    cp = _parse(path)
    sec = cp["study"] if cp.has_section("study") else {}
    ests, truth = _estimators_from(cp)
    kwargs = dict(
        scenarios=_ints(sec.get("scenarios", "1,2,3,4,5,6,7,8")),
        replicates=int(sec.get("replicates", 20)),
        master_seed=int(sec.get("master_seed", 20080620)),
        bootstrap_B=int(sec.get("bootstrap_b", 300)),
        lowess_fraction=float(sec.get("lowess_fraction", 0.3)),
        models=_models_from(cp),
        estimators=ests,
        include_true_grid=truth,
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return StudyConfig(**kwargs)


def load_case_study_config(path=None, input_csv=None, **overrides):
    cp = _parse(path)
    sec = cp["case_study"] if cp.has_section("case_study") else {}
    csv_path = input_csv or sec.get("input_csv", "")
    if not csv_path:
        raise DataError("case study requires an input CSV (config [case_study] input_csv or --input)")
    ssec = cp["study"] if cp.has_section("study") else {}
    ests = tuple(e for e in _estimators_from(cp)[0] if e.scheme != "buffered")
    kwargs = dict(
        input_csv=csv_path,
        interval_weeks=_ints(sec.get("interval_weeks", "1,2,4,8")),
        pollutant=sec.get("pollutant", "pollutant"),
        min_locations=int(sec.get("min_locations", 10)),
        master_seed=int(ssec.get("master_seed", 20080620)),
        models=_models_from(cp),
        estimators=ests,
    )
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return CaseStudyConfig(**kwargs)
