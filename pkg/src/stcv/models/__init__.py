"""Reference prediction rules: linear regression, random forest regression
trees, and universal kriging with a separable space-time covariance."""

from .ols import OLSRule, fit_ols
from .forest import ForestParams, ForestRule, fit_random_forest
from .kriging import KrigingConfig, KrigingParams, KrigingRule, fit_kriging
from .spec import ModelSpec

__all__ = [
    "OLSRule",
    "fit_ols",
    "ForestParams",
    "ForestRule",
    "fit_random_forest",
    "KrigingConfig",
    "KrigingParams",
    "KrigingRule",
    "fit_kriging",
    "ModelSpec",
]
