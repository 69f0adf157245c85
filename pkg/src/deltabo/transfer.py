"""DeltaBO: transfer BO through a frozen source posterior and a residual GP.

The target is modelled as ``f = g + delta``. The source posterior
``(mu_g, var_g)`` is computed once from the source data. Each target
observation ``y_t`` becomes a residual ``y_t - mu_g(x_t)``, an unbiased
observation of ``delta(x_t)`` whose noise variance is ``var_g(x_t) + sigma2``.
Queries maximize ``mu_g + mu_delta + sqrt(beta) * sqrt(var_g + var_delta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _accel
from .gp import Dataset, Posterior, fit_posterior
from .kernels import Kernel, build_kernel_matrix, cross_kernel, kernel_diag
from .testbed import FiniteDomain
from .trace import RegretTrace, run_loop

NOISE_MODES = ("per_observation", "per_test_point")
PRIOR_VARIANCE_MODES = ("paper", "kernel_diag")


@dataclass(frozen=True)
class SourceModel:
    """Source posterior mean and variance on every domain point. Never mutated."""

    mu_g: np.ndarray
    var_g: np.ndarray
    source_noise: float
    n_source: int
    kernel: Kernel | None = None

    def __post_init__(self):
        for name in ("mu_g", "var_g"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def build_source_model(kernel_g: Kernel, source_data: Dataset, domain: FiniteDomain) -> SourceModel:
    """Condition ``GP(0, kernel_g)`` on the source data and tabulate it on ``domain``."""
    if len(source_data) == 0:
        raise ValueError("empty source data: use a non-transfer baseline instead")
    noise = np.unique(source_data.noise)
    if noise.size != 1:
        raise ValueError("source data must share a single noise variance")
    post = fit_posterior(kernel_g, source_data)
    mu, var = post.predict(domain.points)
    return SourceModel(mu, var, float(noise[0]), len(source_data), kernel_g)


def residual(y_t: float, source: SourceModel, index: int) -> float:
    """Target observation minus the source posterior mean at the query."""
    return float(y_t) - float(source.mu_g[index])


def beta_t(t: int, domain_size: int, rho: float) -> float:
    """Confidence multiplier ``2 log(|D| t^2 pi^2 / (6 rho))``."""
    if t < 1 or domain_size < 1 or not 0 < rho < 1:
        raise ValueError("need t >= 1, domain_size >= 1 and 0 < rho < 1")
    return 2.0 * math.log(domain_size * t * t * math.pi**2 / (6.0 * rho))


@dataclass(frozen=True)
class BetaSchedule:
    """Either the theory schedule (``mode="theorem"``) or a constant."""

    mode: str = "constant"
    value: float = 0.2
    rho: float = 0.1
    domain_size: int = 1

    def __post_init__(self):
        if self.mode not in ("constant", "theorem"):
            raise ValueError(f"unknown beta mode {self.mode!r}")
        if self.mode == "constant" and not self.value >= 0:
            raise ValueError("constant beta must be >= 0")

    def __call__(self, t: int) -> float:
        if self.mode == "constant":
            return float(self.value)
        return beta_t(t, self.domain_size, self.rho)

    def for_domain(self, size: int) -> "BetaSchedule":
        return replace(self, domain_size=int(size))


@dataclass(frozen=True)
class DeltaState:
    """Residual GP over the difference function plus the round counter.

    ``delta_posterior`` tracks the domain, so mean and variance on every
    domain point are updated in place of a refit after each observation.
    """

    delta_posterior: Posterior
    t: int = 1
    noise_mode: str = "per_observation"
    prior_variance: str = "paper"

    @property
    def n_residuals(self) -> int:
        return len(self.delta_posterior)


def init_delta_state(kernel_delta: Kernel, domain: FiniteDomain,
                     noise_mode: str = "per_observation",
                     prior_variance: str = "paper") -> DeltaState:
    if noise_mode not in NOISE_MODES:
        raise ValueError(f"delta_noise_mode must be one of {NOISE_MODES}")
    if prior_variance not in PRIOR_VARIANCE_MODES:
        raise ValueError(f"delta_prior_variance must be one of {PRIOR_VARIANCE_MODES}")
    post = fit_posterior(kernel_delta, Dataset.empty(domain.dim)).track(domain.points)
    return DeltaState(post, 1, noise_mode, prior_variance)


def observe_residual(state: DeltaState, source: SourceModel, domain: FiniteDomain,
                     index: int, y: float, sigma2: float) -> DeltaState:
    """Feed ``(x, y - mu_g(x))`` with noise ``var_g(x) + sigma2`` to the residual GP."""
    ytil = residual(y, source, index)
    noise = float(source.var_g[index]) + sigma2
    post = state.delta_posterior.extend(domain.points[index], ytil, noise, index)
    return replace(state, delta_posterior=post)


def _per_test_point(post: Posterior, domain: FiniteDomain, c: np.ndarray):
    """Residual-GP prediction where the noise term uses the test point's ``c(x)``.

    With ``K = Q diag(lam) Q^T`` every test point needs only a diagonal
    solve: ``(K + c I)^{-1} = Q diag(1 / (lam + c)) Q^T``.
    """
    data = post.data
    gram = build_kernel_matrix(post.kernel, data.points)
    lam, q = np.linalg.eigh(gram)
    lam = np.maximum(lam, 0.0)
    proj = q.T @ cross_kernel(post.kernel, data.points, domain.points)  # (n, m)
    b = q.T @ data.values
    denom = lam[:, None] + c[None, :]
    mean = (proj * b[:, None] / denom).sum(axis=0)
    var = kernel_diag(post.kernel, domain.points) - (proj * proj / denom).sum(axis=0)
    return mean, np.maximum(var, 0.0)


def delta_prediction(state: DeltaState, source: SourceModel, domain: FiniteDomain, sigma2: float):
    """``(mu_delta, var_delta)`` on every domain point for the current round."""
    post = state.delta_posterior
    if len(post) == 0:
        mean = np.zeros(len(domain))
        if state.prior_variance == "paper":
            return mean, source.var_g + sigma2
        return mean, kernel_diag(post.kernel, domain.points)
    if state.noise_mode == "per_test_point":
        return _per_test_point(post, domain, source.var_g + sigma2)
    return post.domain_mean(), post.domain_variance()


def acquire(source: SourceModel, state: DeltaState, domain: FiniteDomain, beta: float,
            sigma2: float) -> int:
    """Index maximizing the combined upper confidence bound (lowest index on ties)."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    mu_d, var_d = delta_prediction(state, source, domain, sigma2)
    idx, _ = _accel.delta_ucb_argmax(source.mu_g, source.var_g, mu_d, var_d, float(beta))
    return idx


class DeltaBO:
    """Stateful strategy wrapper around :class:`DeltaState` for the run loop."""

    name = "deltabo"

    def __init__(self, source: SourceModel, kernel_delta: Kernel, domain: FiniteDomain,
                 sigma2: float, beta: BetaSchedule,
                 noise_mode: str = "per_observation", prior_variance: str = "paper"):
        if not sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        self.source = source
        self.domain = domain
        self.sigma2 = float(sigma2)
        self.beta = beta.for_domain(len(domain)) if beta.mode == "theorem" else beta
        self.state = init_delta_state(kernel_delta, domain, noise_mode, prior_variance)

    def prime(self, indices, values) -> None:
        """Feed initial target observations as residuals before round 1."""
        for i, y in zip(indices, values):
            self.state = observe_residual(self.state, self.source, self.domain, int(i),
                                          float(y), self.sigma2)

    def confidence(self):
        """Center ``mu_g + mu_delta`` and standard deviation on every domain point."""
        mu_d, var_d = delta_prediction(self.state, self.source, self.domain, self.sigma2)
        return self.source.mu_g + mu_d, np.sqrt(np.maximum(self.source.var_g + var_d, 0.0))

    def select(self, t: int, rng=None) -> int:
        self.state = replace(self.state, t=t)
        return acquire(self.source, self.state, self.domain, self.beta(t), self.sigma2)

    def observe(self, index: int, y: float) -> None:
        self.state = observe_residual(self.state, self.source, self.domain, index, y, self.sigma2)


def run_deltabo(objective, source: SourceModel, kernel_delta: Kernel, domain: FiniteDomain,
                horizon: int, sigma2: float, beta_schedule: BetaSchedule, seed,
                noise_z=None, init=None, noise_mode: str = "per_observation",
                prior_variance: str = "paper", replication: int = 0) -> RegretTrace:
    """Run DeltaBO for ``horizon`` rounds.

    ``seed`` drives the output draw and, unless ``noise_z`` is given, the
    observation noise. ``init`` is an optional ``(indices, values)`` pair of
    target observations fed to the residual GP before round 1. The trace
    carries both the uniform output draw ``x_hat_index`` and the last query.
    """
    rng = np.random.default_rng(seed)
    if noise_z is None:
        noise_z = rng.standard_normal(horizon)
    algo = DeltaBO(source, kernel_delta, domain, sigma2, beta_schedule, noise_mode, prior_variance)
    best = -math.inf
    if init is not None:
        algo.prime(*init)
        if len(init[1]):
            best = float(np.max(init[1]))
    return run_loop(algo, objective, horizon, sigma2, noise_z, rng, replication, best)
