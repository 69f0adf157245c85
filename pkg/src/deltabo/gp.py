"""Exact Gaussian-process regression on small training sets.

Noise is per observation: the posterior conditions on ``K + diag(noise)``.
A constant ``noise`` vector gives the textbook homoscedastic model.

Posterior objects are immutable snapshots. :meth:`Posterior.extend` returns
a new snapshot built from a rank-one extension of the Cholesky factor, and
:meth:`Posterior.track` attaches a cache of predictions on a fixed point set
that ``extend`` keeps up to date in ``O(n * m)`` per step.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _accel
from .kernels import (
    JITTER,
    Kernel,
    as_points,
    build_kernel_matrix,
    cross_kernel,
    jittered_cholesky,
    kernel_diag,
)

log = logging.getLogger(__name__)

NEG_VARIANCE_TOL = 1e-9
DEFAULT_FACTOR_CAP = 20_000


class NumericalError(ArithmeticError):
    """A factorization or variance computation went numerically bad."""


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Training inputs, observed values and one noise variance per observation.

    ``index`` optionally records the domain index of each point; samplers use
    it to reuse a cached factorization of the domain kernel matrix.
    """

    points: np.ndarray
    values: np.ndarray
    noise: np.ndarray
    index: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {pts.shape}")
        vals = np.asarray(self.values, dtype=float).ravel()
        noise = np.asarray(self.noise, dtype=float).ravel()
        n = pts.shape[0]
        if vals.shape[0] != n or noise.shape[0] != n:
            raise ValueError(
                f"length mismatch: {n} points, {vals.shape[0]} values, {noise.shape[0]} noise"
            )
        if np.any(~(noise > 0)):
            raise ValueError("every noise variance must be > 0")
        if not np.all(np.isfinite(vals)):
            raise ValueError("observed values must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "noise", _frozen(noise))
        if self.index is not None:
            idx = np.array(self.index, dtype=np.int64).ravel()
            if idx.shape[0] != n:
                raise ValueError("index length must match the number of points")
            idx.setflags(write=False)
            object.__setattr__(self, "index", idx)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))

    @classmethod
    def homoscedastic(cls, points, values, sigma2: float, index=None) -> "Dataset":
        pts = np.asarray(points, dtype=float)
        return cls(pts, values, np.full(pts.shape[0], float(sigma2)), index)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def append(self, point, value, noise, index=None) -> "Dataset":
        pts = np.vstack([self.points, np.asarray(point, dtype=float).reshape(1, -1)])
        idx = None
        if self.index is not None and index is not None:
            idx = np.append(self.index, int(index))
        return Dataset(pts, np.append(self.values, value), np.append(self.noise, noise), idx)


@dataclass(frozen=True)
class _DomainCache:
    points: np.ndarray
    prior_var: np.ndarray
    rows: np.ndarray  # L^{-1} K(X, points), one row per observation
    mean: np.ndarray
    var: np.ndarray


class Posterior:
    """GP posterior given a kernel and a :class:`Dataset`.

    Use :func:`fit_posterior` to build one. ``mean``/``variance`` accept a
    batch of points; ``mean_at``/``variance_at`` a single point.
    """

    __slots__ = ("kernel", "data", "chol", "white", "_cache")

    def __init__(self, kernel: Kernel, data: Dataset, chol: np.ndarray, white: np.ndarray,
                 cache: _DomainCache | None = None):
        self.kernel = kernel
        self.data = data
        self.chol = _frozen(chol)
        self.white = _frozen(white)
        self._cache = cache

    def __len__(self):
        return len(self.data)

    # -- prediction -------------------------------------------------------

    def _project(self, pts):
        if len(self.data) == 0:
            return np.zeros((0, pts.shape[0]))
        kxs = cross_kernel(self.kernel, self.data.points, pts)
        return solve_triangular(self.chol, kxs, lower=True, check_finite=False)

    def predict(self, points):
        """Posterior mean and variance at each row of ``points``."""
        pts = as_points(points, dim=self.data.dim)
        v = self._project(pts)
        mean = v.T @ self.white
        raw = kernel_diag(self.kernel, pts) - np.einsum("ij,ij->j", v, v)
        return mean, _clamp(raw, kernel_diag(self.kernel, pts))

    def mean(self, points) -> np.ndarray:
        return self.predict(points)[0]

    def variance(self, points) -> np.ndarray:
        return self.predict(points)[1]

    def mean_at(self, point) -> float:
        return float(self.mean(np.asarray(point, dtype=float).reshape(1, -1))[0])

    def variance_at(self, point) -> float:
        return float(self.variance(np.asarray(point, dtype=float).reshape(1, -1))[0])

    def covariance(self, points) -> np.ndarray:
        """Full posterior covariance over ``points``."""
        pts = as_points(points, dim=self.data.dim)
        v = self._project(pts)
        cov = build_kernel_matrix(self.kernel, pts) - v.T @ v
        return 0.5 * (cov + cov.T)

    # -- cached domain predictions ---------------------------------------

    def track(self, points) -> "Posterior":
        """Return a snapshot that caches predictions on ``points``."""
        pts = as_points(points, dim=self.data.dim)
        prior = kernel_diag(self.kernel, pts)
        rows = self._project(pts)
        mean = rows.T @ self.white
        var = prior - np.einsum("ij,ij->j", rows, rows)
        cache = _DomainCache(pts, prior, rows, mean, var)
        return Posterior(self.kernel, self.data, self.chol, self.white, cache)

    @property
    def tracked(self) -> bool:
        return self._cache is not None

    def domain_mean(self) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("call track(points) first")
        return self._cache.mean

    def domain_variance(self) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("call track(points) first")
        return _clamp(self._cache.var, self._cache.prior_var)

    # -- updates ------------------------------------------------------------

    def extend(self, point, value: float, noise: float, index=None) -> "Posterior":
        """Condition on one more observation via a rank-one factor extension.

        The pivot of the extension is ``variance(point) + noise`` (the Schur
        complement of the old block). If it is not positive the snapshot is
        rebuilt from scratch with jitter.
        """
        if not noise > 0:
            raise ValueError("noise variance must be > 0")
        x = as_points(np.asarray(point, dtype=float).reshape(1, -1), dim=self.data.dim)
        data = self.data.append(x[0], value, noise, index)
        kxx = float(kernel_diag(self.kernel, x)[0])
        if len(self.data):
            l_vec = solve_triangular(
                self.chol, cross_kernel(self.kernel, self.data.points, x)[:, 0],
                lower=True, check_finite=False,
            )
        else:
            l_vec = np.zeros(0)
        pivot2 = kxx + noise - float(l_vec @ l_vec)
        if not pivot2 > 1e-14 * (kxx + noise):
            log.warning("non-positive Schur pivot %.3e; refitting with jitter", pivot2)
            post = fit_posterior(self.kernel, data)
            return post.track(self._cache.points) if self._cache is not None else post
        pivot = np.sqrt(pivot2)
        n = len(self.data)
        chol = np.zeros((n + 1, n + 1))
        chol[:n, :n] = self.chol
        chol[n, :n] = l_vec
        chol[n, n] = pivot
        alpha_new = (float(value) - float(l_vec @ self.white)) / pivot
        white = np.append(self.white, alpha_new)
        cache = None
        if self._cache is not None:
            c = self._cache
            mean = c.mean.copy()
            var = c.var.copy()
            k_new = cross_kernel(self.kernel, x, c.points)[0]
            row = _accel.extend_rows(k_new, l_vec, c.rows, pivot, alpha_new, mean, var)
            cache = _DomainCache(c.points, c.prior_var, np.vstack([c.rows, row]), mean, var)
        return Posterior(self.kernel, data, chol, white, cache)


def _clamp(raw: np.ndarray, prior: np.ndarray) -> np.ndarray:
    floor = -NEG_VARIANCE_TOL * np.maximum(1.0, prior)
    if np.any(raw < floor):
        worst = float(raw.min())
        raise NumericalError(f"posterior variance {worst:.3e} is below the numerical floor")
    return np.maximum(raw, 0.0)


def fit_posterior(kernel: Kernel, data: Dataset) -> Posterior:
    """Condition a zero-mean GP with ``kernel`` on ``data``."""
    n = len(data)
    if n == 0:
        return Posterior(kernel, data, np.zeros((0, 0)), np.zeros(0))
    gram = build_kernel_matrix(kernel, data.points)
    gram[np.diag_indices(n)] += data.noise
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        try:
            chol, _ = jittered_cholesky(gram, JITTER)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(str(exc)) from exc
    white = solve_triangular(chol, data.values, lower=True, check_finite=False)
    return Posterior(kernel, data, chol, white)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _points_of(domain) -> np.ndarray:
    return as_points(getattr(domain, "points", domain))


def _digest(points: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(points).tobytes()).hexdigest()


_FACTOR_CACHE: dict = {}
_FACTOR_CACHE_SIZE = 4


def prior_factor(kernel: Kernel, domain, cap: int = DEFAULT_FACTOR_CAP) -> np.ndarray:
    """Jittered lower Cholesky factor of the domain kernel matrix (memoized)."""
    pts = _points_of(domain)
    m = pts.shape[0]
    if m == 0:
        raise ValueError("domain is empty")
    if m > cap:
        raise ValueError(
            f"domain has {m} points, above the factorization cap of {cap}; "
            "raise the cap explicitly (memory ~ 8*m^2 bytes) or use a coarser grid"
        )
    key = (kernel, pts.shape, _digest(pts))
    hit = _FACTOR_CACHE.get(key)
    if hit is not None:
        return hit
    gram = build_kernel_matrix(kernel, pts)
    try:
        chol, used = jittered_cholesky(gram, JITTER, relative=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    if used > JITTER * float(np.mean(np.diag(gram))) * 1.5:
        log.warning("domain kernel needed jitter %.1e to factorize", used)
    chol.setflags(write=False)
    if len(_FACTOR_CACHE) >= _FACTOR_CACHE_SIZE:
        _FACTOR_CACHE.pop(next(iter(_FACTOR_CACHE)))
    _FACTOR_CACHE[key] = chol
    return chol


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_prior_function(kernel: Kernel, domain, seed, cap: int = DEFAULT_FACTOR_CAP) -> np.ndarray:
    """One draw of a zero-mean GP on every domain point: ``L @ z``."""
    chol = prior_factor(kernel, domain, cap)
    z = _rng(seed).standard_normal(chol.shape[0])
    return chol @ z


def sample_posterior_on_domain(post: Posterior, domain, rng, cap: int = DEFAULT_FACTOR_CAP) -> np.ndarray:
    """One joint posterior draw over all domain points.

    When every training point carries a domain index the draw uses
    pathwise conditioning on a prior draw from the cached domain factor,
    so no per-call factorization is needed. Otherwise the posterior
    covariance is factorized directly.
    """
    pts = _points_of(domain)
    rng = _rng(rng)
    data = post.data
    if len(data) == 0:
        return sample_prior_function(post.kernel, pts, rng, cap)
    if data.index is not None and len(data.index) == len(data):
        chol = prior_factor(post.kernel, pts, cap)
        prior = chol @ rng.standard_normal(chol.shape[0])
        eps = np.sqrt(data.noise) * rng.standard_normal(len(data))
        resid = data.values - prior[data.index] - eps
        w = solve_triangular(post.chol, resid, lower=True, check_finite=False)
        w = solve_triangular(post.chol.T, w, lower=False, check_finite=False)
        return prior + cross_kernel(post.kernel, pts, data.points) @ w
    if pts.shape[0] > cap:
        raise ValueError(f"domain has {pts.shape[0]} points, above the factorization cap of {cap}")
    mean = post.mean(pts)
    cov = post.covariance(pts)
    try:
        chol, _ = jittered_cholesky(cov, JITTER, max_tries=10)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    return mean + chol @ rng.standard_normal(pts.shape[0])
