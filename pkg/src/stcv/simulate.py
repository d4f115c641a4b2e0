"""Gaussian-process simulation of synthetic space-time fields.

Fields live on a unit-spaced square lattice.  Six covariates are drawn as
independent GPs sharing a sinusoidal mean and a separable squared-exponential
covariance; the outcome is a GP whose mean depends on the first three
covariates (linear, threshold and sigmoidal effects) with the same
covariance, leaving the last three covariates spurious.  A subset of
interior lattice points is sampled as the observed locations; the remaining
interior points form the interpolation holdout (the boundary frame is
excluded from both roles to avoid edge effects).

Dependence levels are calibrated as correlation 0.5 at a stated distance:
2.5 lattice units (spatial moderate), 1.5 (spatial low), lag 2 (temporal
moderate).  These constants, the 20x20 layout, the edge buffer of 2 and the
1e-6 jitter are artifact calibration choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .data import DataError, Location, SpaceTimeDataset

__all__ = [
    "GPSimConfig",
    "ScenarioConfig",
    "SimulatedField",
    "SCENARIOS",
    "sq_exp_covariance",
    "separable_spacetime_cov",
    "covariate_mean",
    "outcome_mean",
    "sample_gp",
    "select_observed",
    "simulate_replicate",
    "scale_for_half_correlation",
]

#: v such that exp(-d^2 / v^2) = 0.5 at distance d
def scale_for_half_correlation(d):
    return d / math.sqrt(math.log(2.0))


SPATIAL_SCALE = {"low": scale_for_half_correlation(1.5), "moderate": scale_for_half_correlation(2.5)}
TEMPORAL_SCALE = {"moderate": scale_for_half_correlation(2.0)}
DEFAULT_EPS = 1e-6
DEFAULT_EDGE_BUFFER = 2.0
DEFAULT_GRID_SIDE = 20
N_COVARIATES = 6


@dataclass(frozen=True)
class GPSimConfig:
    grid_side: int = DEFAULT_GRID_SIDE
    n_days: int = 10
    v_s: float = SPATIAL_SCALE["low"]
    v_t: float = TEMPORAL_SCALE["moderate"]
    eps_jitter: float = DEFAULT_EPS
    n_observed: int = 50
    edge_buffer: float = DEFAULT_EDGE_BUFFER
    seed: int = 0

    def __post_init__(self):
        if self.eps_jitter <= 0:
            raise DataError("eps_jitter must be > 0")
        if self.v_s <= 0 or self.v_t <= 0:
            raise DataError("covariance scales must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """One row of the eight-scenario simulation battery."""

    scenario_id: int
    n_observed: int
    spatial_dependence: str
    n_days: int
    replicates: int = 100
    temporal_dependence: str = "moderate"
    n_locations: int = 400

    def sim_config(self, seed=0):
        side = int(round(math.sqrt(self.n_locations)))
        if side * side != self.n_locations:
            raise DataError(f"{self.n_locations} locations is not a square lattice")
        return GPSimConfig(
            grid_side=side,
            n_days=self.n_days,
            v_s=SPATIAL_SCALE[self.spatial_dependence],
            v_t=TEMPORAL_SCALE[self.temporal_dependence],
            n_observed=self.n_observed,
            seed=seed,
        )


SCENARIOS = {
    1: ScenarioConfig(1, 50, "low", 10),
    2: ScenarioConfig(2, 50, "low", 20),
    3: ScenarioConfig(3, 50, "moderate", 10),
    4: ScenarioConfig(4, 50, "moderate", 20),
    5: ScenarioConfig(5, 150, "low", 10),
    6: ScenarioConfig(6, 150, "low", 20),
    7: ScenarioConfig(7, 150, "moderate", 10),
    8: ScenarioConfig(8, 150, "moderate", 20),
}


def grid_coords(grid_side):
    """Unit-spaced lattice coordinates (1..side) x (1..side), row-major."""
    ax = np.arange(1, grid_side + 1, dtype=float)
    g1, g2 = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def sq_exp_covariance(points, v, eps):
    """Squared-exponential covariance with diagonal jitter."""
    if v <= 0 or eps < 0:
        raise DataError("need v > 0 and eps >= 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(np.isfinite(pts)):
        raise DataError("non-finite coordinates")
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (v * v)) + eps * np.eye(len(pts))


def separable_spacetime_cov(spatial_points, times, v_s, v_t, eps, max_cells=2500):
    """Dense covariance over all (location, time) cells, location-major.

    The ((s_i, t_a), (s_j, t_b)) entry is the product of the spatial and
    temporal factors, i.e. the Kronecker product of the two matrices.
    Materialization is refused above ``max_cells`` cells.
    """
    S = sq_exp_covariance(spatial_points, v_s, eps)
    times = np.asarray(times, dtype=float).reshape(-1, 1)
    T = sq_exp_covariance(times, v_t, eps)
    cells = len(S) * len(T)
    if cells > max_cells:
        raise DataError(f"{cells} cells exceed the dense materialization cap {max_cells}")
    return np.kron(S, T)


def covariate_mean(s, t, u):
    """Sinusoidal covariate mean surface; ``s`` is (..., 2), ``t`` scalar or
    broadcastable, ``u`` the four uniform draws of the replicate."""
    s = np.asarray(s, dtype=float)
    s1, s2 = s[..., 0], s[..., 1]
    u1, u2, u3, u4 = u
    return np.sin(t) * (np.sin(s1) / (250.0 * u1)) * (np.cos(s2) / (125.0 * u2)) + np.cos(t) * (
        np.cos(s1) / (125.0 * u3) + np.sin(s2) / (250.0 * u4)
    )


def outcome_mean(x1, x2, x3):
    """Outcome mean: linear in x1, threshold in x2 (strict > 0.1), sigmoid in x3."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    return 0.5 * x1 - 0.5 * (x2 > 0.1) + 1.0 / (1.0 + np.exp(-x3))


def _chol(M):
    jitters = [0.0, 1e-12, 1e-10, 1e-8, 1e-6]
    scale = float(np.mean(np.diag(M)))
    for j in jitters:
        try:
            return np.linalg.cholesky(M + j * scale * np.eye(len(M)) if j else M)
        except np.linalg.LinAlgError:
            continue
    raise DataError("covariance not positive definite even after jitter escalation")


def sample_gp(mean, cov, seed):
    """One draw mean + L z with L the (jittered) Cholesky factor of cov."""
    mean = np.asarray(mean, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = _chol(np.asarray(cov, dtype=float))
    return mean + L @ rng.standard_normal(len(mean))


def _sample_separable(mean_mat, Ls, Lt, rng):
    """Draw with covariance kron(S, T) using the factor Choleskys; row-major
    vec of the returned (nL, nT) matrix matches the dense kron ordering."""
    Z = rng.standard_normal(mean_mat.shape)
    return mean_mat + Ls @ Z @ Lt.T


def select_observed(coords, n_observed, edge_buffer, seed):
    """Uniform sample of observed locations among lattice points at least
    ``edge_buffer`` away from the bounding-box edge."""
    coords = np.asarray(coords, dtype=float)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    margin = np.minimum(coords - lo, hi - coords).min(axis=1)
    eligible = np.nonzero(margin >= edge_buffer)[0]
    if len(eligible) < n_observed:
        raise DataError(
            f"only {len(eligible)} eligible interior points for n_observed={n_observed}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chosen = rng.choice(eligible, size=n_observed, replace=False)
    return np.sort(chosen)


@lru_cache(maxsize=8)
def _cached_factors(grid_side, n_days, v_s, v_t, eps):
    coords = grid_coords(grid_side)
    times = np.arange(1, n_days + 1, dtype=float)
    S = sq_exp_covariance(coords, v_s, eps)
    T = sq_exp_covariance(times.reshape(-1, 1), v_t, eps)
    return coords, times, _chol(S), _chol(T)


@dataclass(frozen=True)
class SimulatedField:
    config: GPSimConfig
    scenario_id: int
    replicate_id: int
    master_seed: int
    coords: np.ndarray  # (N, 2)
    times: np.ndarray  # (m,)
    covariates: np.ndarray  # (N, m, 6)
    outcome: np.ndarray  # (N, m)
    observed_idx: np.ndarray  # sorted location indices
    u: np.ndarray  # (4,)

    @property
    def eligible_idx(self):
        """Lattice points far enough from the boundary to host a monitor."""
        lo = self.coords.min(axis=0)
        hi = self.coords.max(axis=0)
        margin = np.minimum(self.coords - lo, hi - self.coords).min(axis=1)
        return np.nonzero(margin >= self.config.edge_buffer)[0]

    @property
    def holdout_idx(self):
        # new locations are drawn from the same spatial law as the monitors,
        # so the interpolation holdout is the unobserved *eligible* set; the
        # boundary frame outside it is excluded on both sides
        return np.setdiff1d(self.eligible_idx, self.observed_idx)

    def spatial_corr(self):
        return sq_exp_covariance(self.coords, self.config.v_s, self.config.eps_jitter)

    def temporal_corr(self):
        return sq_exp_covariance(
            self.times.reshape(-1, 1), self.config.v_t, self.config.eps_jitter
        )

    def _dataset(self, loc_idx):
        locs = [Location(int(i), (self.coords[i, 0], self.coords[i, 1])) for i in loc_idx]
        return SpaceTimeDataset(locs, self.times, self.outcome[loc_idx], self.covariates[loc_idx])

    def observed_dataset(self):
        return self._dataset(self.observed_idx)

    def holdout_dataset(self):
        return self._dataset(self.holdout_idx)

    def full_dataset(self):
        return self._dataset(np.arange(len(self.coords)))

    def metadata_text(self):
        c = self.config
        lines = [
            f"scenario = {self.scenario_id}",
            f"replicate = {self.replicate_id}",
            f"master_seed = {self.master_seed}",
            f"grid_side = {c.grid_side}",
            f"n_days = {c.n_days}",
            f"v_s = {c.v_s:.17g}",
            f"v_t = {c.v_t:.17g}",
            f"eps_jitter = {c.eps_jitter:.17g}",
            f"n_observed = {c.n_observed}",
            f"edge_buffer = {c.edge_buffer:.17g}",
            "observed_locations = " + ",".join(str(int(i)) for i in self.observed_idx),
            "u = " + ",".join(f"{v:.17g}" for v in self.u),
        ]
        return "\n".join(lines) + "\n"


def _draw_u(rng, k=4):
    u = rng.random(k)
    while np.any(u == 0.0):  # u must lie in (0, 1]; redraw exact zeros
        z = u == 0.0
        u[z] = rng.random(int(z.sum()))
    return u


def simulate_replicate(scenario, replicate_id=0, master_seed=0):
    """Simulate one replicate of a scenario (or of a raw GPSimConfig).

    The RNG stream derives deterministically from (master_seed, scenario id,
    replicate id), so replicates can be generated concurrently and
    bit-identically reproduced.
    """
    if isinstance(scenario, int):
        scenario = SCENARIOS[scenario]
    if isinstance(scenario, ScenarioConfig):
        scenario_id = scenario.scenario_id
        config = scenario.sim_config(seed=master_seed)
    else:
        scenario_id = 0
        config = scenario
    rng = np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(scenario_id), int(replicate_id)])
    )
    coords, times, Ls, Lt = _cached_factors(
        config.grid_side, config.n_days, config.v_s, config.v_t, config.eps_jitter
    )
    N, m = len(coords), len(times)

    u = _draw_u(rng)
    mu_x = covariate_mean(coords[:, None, :], times[None, :], u)  # (N, m)
    X = np.empty((N, m, N_COVARIATES))
    for k in range(N_COVARIATES):
        X[:, :, k] = _sample_separable(mu_x, Ls, Lt, rng)
    mu_y = outcome_mean(X[:, :, 0], X[:, :, 1], X[:, :, 2])
    y = _sample_separable(mu_y, Ls, Lt, rng)
    observed = select_observed(coords, config.n_observed, config.edge_buffer, rng)
    return SimulatedField(
        config=config,
        scenario_id=scenario_id,
        replicate_id=int(replicate_id),
        master_seed=int(master_seed),
        coords=coords,
        times=times,
        covariates=X,
        outcome=y,
        observed_idx=observed,
        u=u,
    )
