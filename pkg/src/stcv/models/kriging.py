"""Universal kriging with a separable squared-exponential space-time
covariance.

The covariance between two observations is
``sigma2 * exp(-d_s^2 / v_s^2) * exp(-d_t^2 / v_t^2)`` plus a nugget on the
diagonal.  Hyperparameters (v_s, v_t, nugget share) maximize the Gaussian
profile log-likelihood with the mean coefficients and the overall variance
profiled out in closed form; the search is a 3x3x3 multi-start grid in
(log v_s, log v_t, logit nugget share) followed by coordinate-wise
golden-section refinement.

When the training cells form a complete locations-by-times rectangle the
correlation matrix is a Kronecker product and the likelihood is evaluated
through the eigendecompositions of the two factors, which is much cheaper
than a dense factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..data import DataError

__all__ = ["KrigingParams", "KrigingConfig", "KrigingRule", "fit_kriging"]

_LOG2PI = math.log(2.0 * math.pi)
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


class KrigingFitError(DataError):
    """Raised when the likelihood is non-finite at every optimizer probe."""


@dataclass(frozen=True)
class KrigingParams:
    sigma2: float
    v_s: float
    v_t: float
    nugget: float
    beta: np.ndarray  # intercept first, length p + 1

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.v_s > 0 and self.v_t > 0 and self.nugget >= 0):
            raise DataError("kriging parameters out of range")
        if not np.all(np.isfinite(self.beta)):
            raise DataError("non-finite mean coefficients")

    def as_text(self):
        lines = [
            f"sigma2 = {self.sigma2:.17g}",
            f"v_s = {self.v_s:.17g}",
            f"v_t = {self.v_t:.17g}",
            f"nugget = {self.nugget:.17g}",
        ]
        lines += [f"beta{j} = {b:.17g}" for j, b in enumerate(self.beta)]
        return "\n".join(lines)


@dataclass(frozen=True)
class KrigingConfig:
    optimize: bool = True
    v_s: float | None = None  # fixed value when optimize is False
    v_t: float | None = None
    nugget_share: float | None = None  # fixed share of total variance; None = free
    tol: float = 1e-4  # golden-section tolerance in log-parameters
    sweeps: int = 2
    jitter: float = 1e-8  # relative diagonal floor applied on factorization failure


def _chol_with_jitter(M, jitter):
    """Cholesky with escalating diagonal jitter; None if hopeless."""
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(M)))
    j = jitter * scale
    for _ in range(6):
        try:
            return np.linalg.cholesky(M + j * np.eye(len(M))), j
        except np.linalg.LinAlgError:
            j *= 10.0
    return None, j


class _DenseLikelihood:
    """Profile likelihood via dense Cholesky of the correlation matrix."""

    def __init__(self, Ds2, Dt2, A, y, jitter):
        self.Ds2 = Ds2
        self.Dt2 = Dt2
        self.A = A
        self.y = y
        self.jitter = jitter
        self.n = len(y)

    def correlation(self, v_s, v_t, alpha):
        K = np.exp(-self.Ds2 / (v_s * v_s) - self.Dt2 / (v_t * v_t))
        R = (1.0 - alpha) * K
        np.fill_diagonal(R, 1.0)
        return R

    def __call__(self, v_s, v_t, alpha):
        """Return (loglik, beta, s2_total) or None on failure."""
        R = self.correlation(v_s, v_t, alpha)
        L, _ = _chol_with_jitter(R, self.jitter)
        if L is None:
            return None
        Ay = np.column_stack([self.A, self.y])
        W = scipy.linalg.solve_triangular(L, Ay, lower=True)
        Wa, wy = W[:, :-1], W[:, -1]
        G = Wa.T @ Wa
        try:
            beta = np.linalg.solve(G, Wa.T @ wy)
        except np.linalg.LinAlgError:
            return None
        r = wy - Wa @ beta
        s2 = float(r @ r) / self.n
        if not (s2 > 0 and np.isfinite(s2)):
            return None
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        ll = -0.5 * (self.n * math.log(s2) + logdet + self.n * (1.0 + _LOG2PI))
        return (ll, beta, s2) if np.isfinite(ll) else None


class _KroneckerLikelihood:
    """Profile likelihood for training cells forming a full (location x time)
    rectangle, via eigendecompositions of the two correlation factors."""

    def __init__(self, Ds2_loc, Dt2_time, A, y, nL, nT):
        self.Ds2 = Ds2_loc  # (nL, nL) squared distances between unique locations
        self.Dt2 = Dt2_time
        self.A = A  # (n, q) in loc-major cell order
        self.y = y
        self.nL = nL
        self.nT = nT
        self.n = nL * nT

    def __call__(self, v_s, v_t, alpha):
        Ks = np.exp(-self.Ds2 / (v_s * v_s))
        Kt = np.exp(-self.Dt2 / (v_t * v_t))
        try:
            a, Us = np.linalg.eigh(Ks)
            b, Ut = np.linalg.eigh(Kt)
        except np.linalg.LinAlgError:
            return None
        lam = (1.0 - alpha) * np.outer(np.maximum(a, 0.0), np.maximum(b, 0.0)) + alpha
        lam = lam.ravel()
        if np.any(lam <= 0):
            return None
        Ay = np.column_stack([self.A, self.y])
        q = Ay.shape[1]
        T = np.empty((self.n, q))
        for j in range(q):
            M = Ay[:, j].reshape(self.nL, self.nT)
            T[:, j] = (Us.T @ M @ Ut).ravel()
        w = 1.0 / lam
        Wa, wy = T[:, :-1], T[:, -1]
        G = Wa.T @ (w[:, None] * Wa)
        try:
            beta = np.linalg.solve(G, Wa.T @ (w * wy))
        except np.linalg.LinAlgError:
            return None
        r = wy - Wa @ beta
        s2 = float(np.sum(w * r * r)) / self.n
        if not (s2 > 0 and np.isfinite(s2)):
            return None
        logdet = float(np.sum(np.log(lam)))
        ll = -0.5 * (self.n * math.log(s2) + logdet + self.n * (1.0 + _LOG2PI))
        return (ll, beta, s2) if np.isfinite(ll) else None


def _sq_dist(u, v):
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    return ((u[:, None, :] - v[None, :, :]) ** 2).sum(-1)


def _logit(x):
    return math.log(x / (1.0 - x))


def _expit(x):
    return 1.0 / (1.0 + math.exp(-x))


def _golden_min(f, a, b, tol):
    """Golden-section minimization on [a, b]; returns (x, f(x))."""
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


class KrigingRule:
    """Fitted universal-kriging rule."""

    kind = "kriging"

    def __init__(self, params, train_coords, train_times, train_weights):
        self.params = params
        self._coords = train_coords
        self._times = train_times
        self._c = train_weights  # C^{-1} (y - A beta)

    def predict(self, X, coords, times):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        times = np.atleast_1d(np.asarray(times, dtype=float))
        p = self.params
        ds2 = _sq_dist(coords, self._coords)
        dt2 = (times[:, None] - self._times[None, :]) ** 2
        k0 = p.sigma2 * np.exp(-ds2 / (p.v_s**2) - dt2 / (p.v_t**2))
        return p.beta[0] + X @ p.beta[1:] + k0 @ self._c


def _rectangle_perm(loc_codes, time_codes, nL, nT):
    """Permutation sorting cells into location-major rectangle order, or
    None if the cells do not form a complete (location x time) grid."""
    if len(loc_codes) != nL * nT:
        return None
    pairs = loc_codes * nT + time_codes
    if len(np.unique(pairs)) != nL * nT:
        return None
    return np.argsort(pairs, kind="stable")


def fit_kriging(dataset, config: KrigingConfig = KrigingConfig(), idx=None):
    """Fit universal kriging by profile maximum likelihood."""
    y = dataset.obs_y(idx)
    X = dataset.obs_X(idx)
    coords = dataset.obs_coords(idx)
    times = np.asarray(dataset.obs_times(idx), dtype=float)
    n, p = X.shape
    if n < p + 2:
        raise DataError(f"kriging needs at least p + 2 = {p + 2} observations, got {n}")
    uniq_coords, loc_codes = np.unique(coords, axis=0, return_inverse=True)
    uniq_times, time_codes = np.unique(times, return_inverse=True)
    if len(uniq_coords) < 2 or len(uniq_times) < 2:
        raise DataError("kriging needs at least 2 distinct locations and 2 distinct times")
    A = np.column_stack([np.ones(n), X])

    nL, nT = len(uniq_coords), len(uniq_times)
    perm = _rectangle_perm(loc_codes, time_codes, nL, nT)
    # the eigen path needs a strictly positive nugget share to keep the
    # Kronecker spectrum bounded away from zero
    alpha_ok = config.nugget_share is None or config.nugget_share > 0
    if perm is not None and config.optimize and alpha_ok:
        lik = _KroneckerLikelihood(
            _sq_dist(uniq_coords, uniq_coords),
            (uniq_times[:, None] - uniq_times[None, :]) ** 2,
            A[perm], y[perm], nL, nT,
        )
    else:
        lik = _DenseLikelihood(
            _sq_dist(coords, coords),
            (times[:, None] - times[None, :]) ** 2,
            A, y, config.jitter,
        )

    ds = _sq_dist(uniq_coords, uniq_coords)
    dt = (uniq_times[:, None] - uniq_times[None, :]) ** 2
    med_s = math.sqrt(float(np.median(ds[ds > 0])))
    med_t = math.sqrt(float(np.median(dt[dt > 0])))

    if config.optimize:
        theta, out = _optimize(lik, med_s, med_t, config)
        v_s, v_t, alpha = theta
    else:
        if config.v_s is None or config.v_t is None:
            raise DataError("fixed-parameter kriging requires v_s and v_t")
        v_s, v_t = config.v_s, config.v_t
        alpha = config.nugget_share or 0.0
        out = lik(v_s, v_t, alpha)
        if out is None:
            raise KrigingFitError("likelihood not computable at the fixed parameters")
    _, beta, s2 = out
    params = KrigingParams(
        sigma2=(1.0 - alpha) * s2 if alpha < 1.0 else s2 * 1e-12,
        v_s=v_s, v_t=v_t, nugget=alpha * s2, beta=beta,
    )

    # training weights C^{-1} (y - A beta) via dense factorization
    Ds2 = _sq_dist(coords, coords)
    Dt2 = (times[:, None] - times[None, :]) ** 2
    C = params.sigma2 * np.exp(-Ds2 / (v_s * v_s) - Dt2 / (v_t * v_t))
    np.fill_diagonal(C, params.sigma2 + params.nugget)
    L, used_jitter = _chol_with_jitter(C, config.jitter)
    if L is None:
        raise KrigingFitError(
            "training covariance is numerically singular; consider a larger nugget floor"
        )
    resid = y - A @ beta
    c = scipy.linalg.cho_solve((L, True), resid)
    return KrigingRule(params, coords, times, c)


def _optimize(lik, med_s, med_t, config):
    """3x3x3 multi-start grid + coordinate-wise golden-section refinement in
    (log v_s, log v_t, logit alpha).  On an all-non-finite grid the probe
    range is halved once before erroring."""
    alpha_fixed = config.nugget_share

    def eval_theta(th):
        v_s = math.exp(th[0])
        v_t = math.exp(th[1])
        alpha = alpha_fixed if alpha_fixed is not None else _expit(th[2])
        out = lik(v_s, v_t, alpha)
        return -out[0] if out is not None else math.inf

    for mult in ((1.0 / 3.0, 1.0, 3.0), (1.0 / math.sqrt(3.0), 1.0, math.sqrt(3.0))):
        probes = []
        alpha_grid = (0.02, 0.15, 0.6) if alpha_fixed is None else (alpha_fixed,)
        for ms in mult:
            for mt in mult:
                for a in alpha_grid:
                    th = [math.log(med_s * ms), math.log(med_t * mt),
                          _logit(min(max(a, 1e-6), 1 - 1e-6))]
                    probes.append((eval_theta(th), th))
        finite = [(f, th) for f, th in probes if math.isfinite(f)]
        if finite:
            break
    else:
        log = "\n".join(f"theta={th} -> {f}" for f, th in probes)
        raise KrigingFitError(f"likelihood non-finite at every probe:\n{log}")

    fbest, theta = min(finite, key=lambda t: t[0])
    theta = list(theta)
    n_coords = 2 if alpha_fixed is not None else 3
    span = (math.log(4.0), math.log(4.0), 2.0)
    for _ in range(config.sweeps):
        for i in range(n_coords):
            def f1(x, i=i):
                th = list(theta)
                th[i] = x
                return eval_theta(th)

            x, fx = _golden_min(f1, theta[i] - span[i], theta[i] + span[i], config.tol)
            if fx < fbest:
                theta[i] = x
                fbest = fx

    v_s = math.exp(theta[0])
    v_t = math.exp(theta[1])
    alpha = alpha_fixed if alpha_fixed is not None else _expit(theta[2])
    out = lik(v_s, v_t, alpha)
    if out is None:
        raise KrigingFitError("likelihood non-finite at the selected optimum")
    return (v_s, v_t, alpha), out
