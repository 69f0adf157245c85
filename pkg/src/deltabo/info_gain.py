"""Mutual information of noisy GP observations, greedy/exhaustive maximizers
and closed-form growth-rate diagnostics for the maximum information gain.

All values are in nats.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .gp import Dataset, fit_posterior
from .kernels import Kernel, as_points, build_kernel_matrix

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)


@dataclass(frozen=True)
class GainEstimate:
    value: float
    subset: tuple
    method: str  # "exact_bruteforce" or "greedy"
    marginal_gains: tuple = ()


def _gram(kernel: Kernel, points) -> np.ndarray:
    pts = as_points(points)
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    return build_kernel_matrix(kernel, pts)


def mutual_information_eig(kernel: Kernel, noise_sigma2: float, points) -> float:
    """``0.5 * sum(log1p(lambda_i / sigma2))`` over the eigenvalues of ``K_A``."""
    if not noise_sigma2 > 0:
        raise ValueError("noise variance must be > 0")
    lam = np.linalg.eigvalsh(_gram(kernel, points))
    if not np.all(np.isfinite(lam)):
        raise ArithmeticError("non-finite eigenvalue")
    return float(0.5 * np.sum(np.log1p(np.maximum(lam, 0.0) / noise_sigma2)))


def mutual_information_chol(kernel: Kernel, noise_sigma2: float, points) -> float:
    """``0.5 * log det(I + K_A / sigma2)`` from a Cholesky factor."""
    if not noise_sigma2 > 0:
        raise ValueError("noise variance must be > 0")
    k = _gram(kernel, points)
    m = np.eye(k.shape[0]) + k / noise_sigma2
    chol = np.linalg.cholesky(m)
    return float(np.sum(np.log(np.diag(chol))))


def mutual_information(kernel: Kernel, noise_sigma2: float, points) -> float:
    return mutual_information_chol(kernel, noise_sigma2, points)


def greedy_gamma(kernel: Kernel, noise_sigma2: float, domain, budget: int) -> GainEstimate:
    """Greedy maximizer of the information gain of ``budget`` distinct points.

    Each step adds the point with the largest posterior variance, i.e. the
    largest marginal gain ``0.5 * log(1 + var / sigma2)``; ties go to the
    lowest index.
    """
    pts = as_points(getattr(domain, "points", domain))
    if not 1 <= budget <= pts.shape[0]:
        raise ValueError(f"budget must be in [1, {pts.shape[0]}]")
    post = fit_posterior(kernel, Dataset.empty(pts.shape[1])).track(pts)
    chosen: list = []
    gains: list = []
    taken = np.zeros(pts.shape[0], dtype=bool)
    for _ in range(budget):
        var = np.where(taken, -np.inf, post.domain_variance())
        i = int(np.argmax(var))
        gains.append(0.5 * math.log1p(max(var[i], 0.0) / noise_sigma2))
        chosen.append(i)
        taken[i] = True
        post = post.extend(pts[i], 0.0, noise_sigma2, i)
    return GainEstimate(float(sum(gains)), tuple(chosen), "greedy", tuple(gains))


def exact_gamma(kernel: Kernel, noise_sigma2: float, domain, budget: int,
                max_subsets: int = 200_000) -> GainEstimate:
    """Maximum information gain by enumerating every subset of size ``budget``."""
    pts = as_points(getattr(domain, "points", domain))
    m = pts.shape[0]
    if not 1 <= budget <= m:
        raise ValueError(f"budget must be in [1, {m}]")
    if math.comb(m, budget) > max_subsets:
        raise ValueError(f"C({m},{budget}) subsets exceeds the enumeration cap {max_subsets}")
    full = build_kernel_matrix(kernel, pts)
    best, best_set = -math.inf, ()
    eye = np.eye(budget)
    for subset in itertools.combinations(range(m), budget):
        sub = full[np.ix_(subset, subset)]
        sign, logdet = np.linalg.slogdet(eye + sub / noise_sigma2)
        val = 0.5 * logdet
        if val > best:
            best, best_set = val, subset
    return GainEstimate(float(best), tuple(best_set), "exact_bruteforce")


def prop1_bound(family: str, tau2: float, T: int, d: int, smoothness: float | None = None,
                c1: float = 1.0, c2: float = 1.0) -> float:
    """Shape-only growth diagnostic for the information gain of a scaled kernel.

    ``C1 * tau2 * rate(T, d) + C2 * log(1 + tau2)`` where ``rate`` is
    ``d log(eT)`` (linear), ``(log T)^(d+1)`` (se) or
    ``T^(d(d+1)/(2 nu + d(d+1))) log T`` (matern, needs ``nu > 1``). The
    constants are unknown; the defaults only fix the shape.
    """
    if T < 1 or d < 1 or not tau2 > 0:
        raise ValueError("need T >= 1, d >= 1 and tau2 > 0")
    logt = math.log(T)
    if family == "linear":
        rate = d * math.log(math.e * T)
    elif family == "se":
        rate = logt ** (d + 1)
    elif family in ("matern", "matern52"):
        nu = 2.5 if smoothness is None else float(smoothness)
        if not nu > 1:
            raise ValueError("Matérn rate requires smoothness nu > 1")
        expo = d * (d + 1) / (2 * nu + d * (d + 1))
        rate = T**expo * logt
    else:
        raise ValueError(f"unknown family {family!r}")
    return c1 * tau2 * rate + c2 * math.log1p(tau2)


def source_variance_bound(gamma_g: float, sigma0_sq: float, n_source: int) -> float:
    """``2 gamma sigma0^2 / (N - 2 gamma)``; infinite when ``N <= 2 gamma``."""
    denom = n_source - 2.0 * gamma_g
    if denom <= 0:
        return math.inf
    return 2.0 * gamma_g * sigma0_sq / denom


def regret_bound(T: int, beta_T: float, gamma_g: float, gamma_delta: float, n_source: int,
                 sigma0_sq: float, sigma2: float, tau2: float) -> float:
    """High-probability cumulative-regret bound for the transfer algorithm."""
    denom = n_source - 2.0 * gamma_g
    if denom <= 0:
        return math.inf
    ratio = tau2 / sigma2
    c2 = ratio / math.log1p(ratio)
    g_term = T * gamma_g * sigma0_sq / denom
    d_term = c2 * gamma_delta * (2.0 * gamma_g * sigma0_sq / denom + sigma2)
    return math.sqrt(8.0 * T * beta_T * (g_term + d_term))
