"""Non-transfer acquisition rules and transfer stand-ins behind one strategy shape.

``env_gp_style`` and ``diff_gp_style`` are reconstructions from a prose
description only, not faithful ports of the original methods:

* env_gp_style: GP-UCB on the union of source and target observations, with
  the source observations' noise inflated by ``env_noise_inflation``.
* diff_gp_style: the DeltaBO acquisition with one shared kernel for source,
  target and difference, where every round re-estimates the source
  predictions and refits the difference GP from scratch.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import norm

from . import _accel
from .gp import Dataset, Posterior, fit_posterior, sample_posterior_on_domain
from .kernels import Kernel
from .testbed import FiniteDomain
from .trace import RegretTrace, run_loop
from .transfer import BetaSchedule, SourceModel, build_source_model

DEFAULT_XI = 0.01


def _domain_prediction(post: Posterior, domain: FiniteDomain):
    if post.tracked:
        return post.domain_mean(), post.domain_variance()
    return post.predict(domain.points)


def gp_ucb_select(post: Posterior, domain: FiniteDomain, beta: float) -> int:
    """argmax of ``mean + sqrt(beta) * std``; lowest index on ties."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    mean, var = _domain_prediction(post, domain)
    return _accel.ucb_argmax(mean, var, float(beta))[0]


def expected_improvement(mean, std, best: float, xi: float = DEFAULT_XI) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    gap = mean - best - xi
    out = np.maximum(gap, 0.0)
    pos = std > 0
    z = gap[pos] / std[pos]
    out[pos] = gap[pos] * norm.cdf(z) + std[pos] * norm.pdf(z)
    return out


def probability_of_improvement(mean, std, best: float, xi: float = DEFAULT_XI) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    gap = mean - best - xi
    out = (gap > 0).astype(float)
    pos = std > 0
    out[pos] = norm.cdf(gap[pos] / std[pos])
    return out


def ei_select(post: Posterior, domain: FiniteDomain, best_so_far: float, xi: float = DEFAULT_XI) -> int:
    mean, var = _domain_prediction(post, domain)
    return _accel.first_near_max(expected_improvement(mean, np.sqrt(var), best_so_far, xi))


def pi_select(post: Posterior, domain: FiniteDomain, best_so_far: float, xi: float = DEFAULT_XI) -> int:
    mean, var = _domain_prediction(post, domain)
    return _accel.first_near_max(probability_of_improvement(mean, np.sqrt(var), best_so_far, xi))


def ts_select(post: Posterior, domain: FiniteDomain, rng) -> int:
    """argmax of one joint posterior draw over the domain."""
    return int(np.argmax(sample_posterior_on_domain(post, domain, rng)))


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


class TargetGP:
    """Target-only GP strategy; ``rule`` is one of ucb, ei, pi, ts."""

    RULES = {"ucb": "gp_ucb", "ei": "gp_ei", "pi": "gp_pi", "ts": "gp_ts"}

    def __init__(self, rule: str, kernel: Kernel, domain: FiniteDomain, sigma2: float,
                 beta: BetaSchedule | None = None, xi: float = DEFAULT_XI):
        if rule not in self.RULES:
            raise ValueError(f"unknown rule {rule!r}")
        self.rule = rule
        self.name = self.RULES[rule]
        self.domain = domain
        self.sigma2 = float(sigma2)
        beta = beta or BetaSchedule()
        self.beta = beta.for_domain(len(domain)) if beta.mode == "theorem" else beta
        self.xi = xi
        self.best = -math.inf
        self.post = fit_posterior(kernel, Dataset.empty(domain.dim)).track(domain.points)

    def prime(self, indices, values) -> None:
        for i, y in zip(indices, values):
            self.observe(int(i), float(y))

    def select(self, t: int, rng) -> int:
        if self.rule == "ucb":
            return gp_ucb_select(self.post, self.domain, self.beta(t))
        if self.rule == "ts":
            return ts_select(self.post, self.domain, rng)
        if not math.isfinite(self.best):
            raise ValueError(f"{self.name} needs at least one prior observation")
        if self.rule == "ei":
            return ei_select(self.post, self.domain, self.best, self.xi)
        return pi_select(self.post, self.domain, self.best, self.xi)

    def observe(self, index: int, y: float) -> None:
        self.best = max(self.best, y)
        self.post = self.post.extend(self.domain.points[index], y, self.sigma2, index)


class EnvGPStyle(TargetGP):
    """GP-UCB on source + target data with inflated source noise."""

    def __init__(self, kernel_f: Kernel, domain: FiniteDomain, sigma2: float,
                 source_data: Dataset, env_noise_inflation: float, beta: BetaSchedule | None = None):
        if env_noise_inflation < 0:
            raise ValueError("env_noise_inflation must be >= 0")
        super().__init__("ucb", kernel_f, domain, sigma2, beta)
        self.name = "env_gp_style"
        src = Dataset(source_data.points, source_data.values,
                      source_data.noise + env_noise_inflation, source_data.index)
        self.post = fit_posterior(kernel_f, src).track(domain.points)


class DiffGPStyle:
    """DeltaBO's acquisition under one shared kernel, recomputed from scratch each round."""

    name = "diff_gp_style"

    def __init__(self, kernel_shared: Kernel, domain: FiniteDomain, sigma2: float,
                 source_data: Dataset, beta: BetaSchedule | None = None):
        self.kernel = kernel_shared
        self.domain = domain
        self.sigma2 = float(sigma2)
        self.source_data = source_data
        beta = beta or BetaSchedule()
        self.beta = beta.for_domain(len(domain)) if beta.mode == "theorem" else beta
        self.indices: list = []
        self.values: list = []

    def prime(self, indices, values) -> None:
        for i, y in zip(indices, values):
            self.observe(int(i), float(y))

    def _models(self):
        source: SourceModel = build_source_model(self.kernel, self.source_data, self.domain)
        if not self.indices:
            zeros = np.zeros(len(self.domain))
            return source, zeros, source.var_g + self.sigma2
        idx = np.array(self.indices)
        resid = np.array(self.values) - source.mu_g[idx]
        data = Dataset(self.domain.points[idx], resid, source.var_g[idx] + self.sigma2, idx)
        mu_d, var_d = fit_posterior(self.kernel, data).predict(self.domain.points)
        return source, mu_d, var_d

    def select(self, t: int, rng=None) -> int:
        source, mu_d, var_d = self._models()
        return _accel.delta_ucb_argmax(source.mu_g, source.var_g, mu_d, var_d, self.beta(t))[0]

    def observe(self, index: int, y: float) -> None:
        self.indices.append(int(index))
        self.values.append(float(y))


def _run(strategy, objective, horizon, sigma2, seed, noise_z, init, replication) -> RegretTrace:
    rng = np.random.default_rng(seed)
    if noise_z is None:
        noise_z = rng.standard_normal(horizon)
    best = -math.inf
    if init is not None:
        strategy.prime(*init)
        if len(init[1]):
            best = float(np.max(init[1]))
    return run_loop(strategy, objective, horizon, sigma2, noise_z, rng, replication, best)


def env_gp_run(objective, source_data: Dataset, kernel_f: Kernel, domain: FiniteDomain,
               horizon: int, sigma2: float, beta: BetaSchedule, env_noise_inflation: float,
               seed=0, noise_z=None, init=None, replication: int = 0) -> RegretTrace:
    strategy = EnvGPStyle(kernel_f, domain, sigma2, source_data, env_noise_inflation, beta)
    return _run(strategy, objective, horizon, sigma2, seed, noise_z, init, replication)


def diff_gp_run(objective, source_data: Dataset, kernel_shared: Kernel, domain: FiniteDomain,
                horizon: int, sigma2: float, beta: BetaSchedule, seed=0, noise_z=None,
                init=None, replication: int = 0) -> RegretTrace:
    strategy = DiffGPStyle(kernel_shared, domain, sigma2, source_data, beta)
    return _run(strategy, objective, horizon, sigma2, seed, noise_z, init, replication)


def target_gp_run(rule: str, objective, kernel: Kernel, domain: FiniteDomain, horizon: int,
                  sigma2: float, beta: BetaSchedule | None = None, xi: float = DEFAULT_XI,
                  seed=0, noise_z=None, init=None, replication: int = 0) -> RegretTrace:
    strategy = TargetGP(rule, kernel, domain, sigma2, beta, xi)
    return _run(strategy, objective, horizon, sigma2, seed, noise_z, init, replication)
