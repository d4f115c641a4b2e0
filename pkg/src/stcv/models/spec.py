"""Declarative model specification used by the estimators and the harness."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..data import DataError
from .forest import ForestParams, fit_random_forest
from .kriging import KrigingConfig, fit_kriging
from .ols import fit_ols

__all__ = ["ModelSpec"]

KINDS = ("ols", "random_forest", "kriging")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    forest: ForestParams = ForestParams()
    kriging: KrigingConfig = KrigingConfig()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")

    def fit(self, dataset, idx=None, seed=None):
        """Fit this model on the selected observations.

        ``seed``, when given, overrides the forest RNG seed so that
        per-fold streams can be derived from (master seed, fold id).
        """
        if self.kind == "ols":
            return fit_ols(dataset, idx=idx)
        if self.kind == "random_forest":
            params = self.forest if seed is None else replace(self.forest, seed=seed)
            return fit_random_forest(dataset, params, idx=idx)
        return fit_kriging(dataset, self.kriging, idx=idx)
