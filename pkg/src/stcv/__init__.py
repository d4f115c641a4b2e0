"""stcv: cross-validation estimators of space-time interpolation error.

Provides the marked space-time data model, fold constructors (naive K-fold,
leave-location-out, LOLO, spatially buffered), three reference interpolation
models (least squares, random forest, universal kriging), a Gaussian-process
simulation engine with an exact conditional-variance oracle, and a CLI
harness that renders CSV tables and SVG figures.
"""

from .data import (
    DataError,
    FoldAssignment,
    Location,
    LossValue,
    SpaceTimeDataset,
    build_dataset,
    mse_loss,
    read_dataset_csv,
    write_dataset_csv,
)
from .partition import PartitionSpec, buffered_llo, llo_k, lolo, make_partition, naive_kfold
from .models import ForestParams, KrigingConfig, KrigingParams, ModelSpec
from .errors import (
    ErrorReport,
    cv_estimate,
    oob_bootstrap_estimate,
    true_interpolation_error,
    validation_error,
)
from .simulate import (
    GPSimConfig,
    SCENARIOS,
    ScenarioConfig,
    SimulatedField,
    covariate_mean,
    outcome_mean,
    sample_gp,
    select_observed,
    separable_spacetime_cov,
    simulate_replicate,
    sq_exp_covariance,
)
from .condvar import conditional_covariance, conditional_variance_profile
from .summaries import bootstrap_bands, lowess

__version__ = "0.1.0"
