"""Prediction error estimators: cross-validated, true-grid, out-of-bag
bootstrap and validation-set error.

All estimators return an :class:`ErrorReport` whose aggregate is the
unweighted mean over folds of per-fold mean losses, so it can be re-derived
exactly from the per-fold records.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import DataError, mse_loss

__all__ = [
    "ErrorReport",
    "cv_estimate",
    "true_interpolation_error",
    "oob_bootstrap_estimate",
    "validation_error",
    "report_csv_rows",
    "REPORT_CSV_HEADER",
]

REPORT_CSV_HEADER = ["estimator", "model", "scenario", "replicate", "fold", "loss", "n_test"]


class FoldFitError(DataError):
    """A model failed to fit on one fold's training set."""

    def __init__(self, fold_id, cause):
        super().__init__(f"model fit failed on fold {fold_id}: {cause}")
        self.fold_id = fold_id
        self.cause = cause


@dataclass(frozen=True)
class ErrorReport:
    estimator_label: str
    per_fold_losses: tuple  # ((fold_id, LossValue), ...)
    estimate: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimate < 0:
            raise DataError("error estimate must be >= 0")

    def recompute_estimate(self):
        """Re-derive the aggregate from the per-fold records."""
        vals = [lv.value for _, lv in self.per_fold_losses]
        return float(np.mean(vals))


def _aggregate(fold_losses, label, metadata):
    vals = [lv.value for _, lv in fold_losses]
    return ErrorReport(label, tuple(fold_losses), float(np.mean(vals)), dict(metadata))


def cv_estimate(dataset, partition, model_spec, loss=mse_loss, seed=0, label=None):
    """Fit-and-score over a fold assignment.

    Per-fold model RNG streams derive from (seed, smallest test index of the
    fold), so identical folds produce identical fits regardless of the order
    in which a partitioner emitted them.  Folds in the report are sorted by
    that same canonical key.
    """
    order = sorted(range(partition.n_folds), key=lambda k: int(np.min(partition.folds[k])))
    fold_losses = []
    for fold_id, k in enumerate(order):
        test = partition.folds[k]
        train = partition.training[k]
        key = int(np.min(test))
        fold_seed = int(np.random.SeedSequence([int(seed), key]).generate_state(1)[0])
        try:
            rule = model_spec.fit(dataset, idx=train, seed=fold_seed)
        except Exception as e:
            raise FoldFitError(fold_id, e) from e
        pred = rule.predict(
            dataset.obs_X(test), dataset.obs_coords(test), dataset.obs_times(test)
        )
        fold_losses.append((fold_id, loss(dataset.obs_y(test), pred)))
    lbl = label or partition.scheme
    meta = {"model": model_spec.kind, "seed": int(seed), "scheme": partition.scheme}
    return _aggregate(fold_losses, lbl, meta)


def true_interpolation_error(rule, holdout, loss=mse_loss, train_coords=None):
    """Mean loss of a trained rule over a holdout dataset whose locations
    are disjoint from the training locations."""
    coords = train_coords
    if coords is None:
        coords = getattr(rule, "_coords", None)
    if coords is not None:
        train_set = {tuple(c) for c in np.atleast_2d(coords)}
        overlap = [loc.id for loc in holdout.locations if tuple(loc.coords) in train_set]
        if overlap:
            raise DataError(f"holdout locations overlap training: {overlap[:5]}")
    if holdout.n_obs == 0:
        raise DataError("empty holdout set")
    pred = rule.predict(holdout.obs_X(), holdout.obs_coords(), holdout.obs_times())
    lv = loss(holdout.obs_y(), pred)
    return ErrorReport("true_grid", ((0, lv),), lv.value, {"model": getattr(rule, "kind", "?")})


def validation_error(rule, validation, loss=mse_loss):
    """Mean loss over an independent validation dataset."""
    if validation.n_obs == 0:
        raise DataError("empty validation set")
    pred = rule.predict(validation.obs_X(), validation.obs_coords(), validation.obs_times())
    lv = loss(validation.obs_y(), pred)
    return ErrorReport("validation", ((0, lv),), lv.value, {"model": getattr(rule, "kind", "?")})


def oob_bootstrap_estimate(dataset, B, model_spec, loss=mse_loss, seed=0):
    """Out-of-bag bootstrap estimator.

    Treats observations as exchangeable rows, so it is an iid-only tool:
    it ignores the space-time structure by design.  Resamples that exclude
    no rows are skipped with a warning.
    """
    if B < 1:
        raise DataError("B must be >= 1")
    n = dataset.n_obs
    rng = np.random.default_rng(seed)
    fold_losses = []
    skipped = 0
    for b in range(B):
        rows = rng.integers(0, n, n)
        oob = np.setdiff1d(np.arange(n), rows)
        if len(oob) == 0:
            skipped += 1
            warnings.warn(f"bootstrap resample {b} excluded no rows; skipped")
            continue
        rule = model_spec.fit(dataset, idx=rows, seed=int(rng.integers(2**31)))
        pred = rule.predict(dataset.obs_X(oob), dataset.obs_coords(oob), dataset.obs_times(oob))
        fold_losses.append((b, loss(dataset.obs_y(oob), pred)))
    if not fold_losses:
        raise DataError("every bootstrap resample excluded no rows")
    meta = {"model": model_spec.kind, "seed": int(seed), "B": B, "skipped": skipped}
    return _aggregate(fold_losses, "oob_bootstrap", meta)


def report_csv_rows(report, model="", scenario="", replicate=""):
    """Serialize an ErrorReport to CSV rows (fold rows + one aggregate row)."""
    rows = []
    total_n = 0
    for fold_id, lv in report.per_fold_losses:
        rows.append([report.estimator_label, model, scenario, replicate,
                     str(fold_id), f"{lv.value:.17g}", str(lv.n)])
        total_n += lv.n
    rows.append([report.estimator_label, model, scenario, replicate,
                 "aggregate", f"{report.estimate:.17g}", str(total_n)])
    return rows
