import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deltabo.info_gain import (ONE_MINUS_INV_E, exact_gamma, greedy_gamma, mutual_information,
                               mutual_information_chol, mutual_information_eig, prop1_bound,
                               regret_bound, source_variance_bound)
from deltabo.kernels import KernelSpec
from deltabo.testbed import FiniteDomain


def test_single_point_half_log_two():
    assert mutual_information(KernelSpec("se", 0.5), 0.5, [[0.0]]) == pytest.approx(0.34657359027997264, abs=1e-15)


def test_duplicate_points_rank_one():
    k = KernelSpec("se")
    assert mutual_information_eig(k, 1.0, [[0.0], [0.0]]) == pytest.approx(0.5493061443340549, abs=1e-14)
    assert mutual_information_chol(k, 1.0, [[0.0], [0.0]]) == pytest.approx(0.5493061443340549, abs=1e-14)


def test_no_signal():
    assert mutual_information(KernelSpec("se", 1e-18), 0.1, np.eye(3)) == pytest.approx(0.0, abs=1e-15)


def test_greedy_on_white_kernel():
    # lengthscale tiny relative to spacing: the three points are independent
    dom = FiniteDomain(np.array([[0.0], [100.0], [200.0]]))
    est = greedy_gamma(KernelSpec("se", 1.0, 1e-3), 1.0, dom, 2)
    assert est.value == pytest.approx(math.log(2), abs=1e-14)
    assert est.subset == (0, 1)


def test_greedy_first_pick_on_stationary_kernel():
    dom = FiniteDomain.grid(-1, 1, 4, 2)
    assert greedy_gamma(KernelSpec("matern52"), 0.1, dom, 1).subset == (0,)


def test_budget_and_noise_validation():
    dom = FiniteDomain.grid(-1, 1, 3, 1)
    with pytest.raises(ValueError):
        greedy_gamma(KernelSpec("se"), 0.1, dom, 4)
    with pytest.raises(ValueError):
        exact_gamma(KernelSpec("se"), 0.1, dom, 0)
    with pytest.raises(ValueError):
        mutual_information_eig(KernelSpec("se"), 0.0, [[0.0]])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.sampled_from(["se", "matern52", "linear"]), st.integers(0, 2**31 - 1))
def test_log_det_paths_agree(n, fam, seed):
    r = np.random.default_rng(seed)
    pts = r.uniform(-2, 2, (n, 2))
    k = KernelSpec(fam, float(r.uniform(0.1, 2)), float(r.uniform(0.3, 2)))
    noise = float(r.uniform(0.01, 1))
    assert abs(mutual_information_eig(k, noise, pts) - mutual_information_chol(k, noise, pts)) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5), st.floats(1.01, 3))
def test_amplitude_monotone(tau2, factor):
    pts = np.array([[0.0, 0.0], [0.3, -0.2], [1.0, 1.0]])
    low = mutual_information(KernelSpec("se", tau2, 0.8), 0.1, pts)
    high = mutual_information(KernelSpec("se", tau2 * factor, 0.8), 0.1, pts)
    assert high > low


def test_marginal_gains_non_increasing():
    dom = FiniteDomain.grid(-1, 1, 8, 2)
    gains = greedy_gamma(KernelSpec("matern52", 1.0, 0.5), 0.05, dom, 20).marginal_gains
    assert all(b <= a + 1e-10 for a, b in zip(gains, gains[1:]))


def test_greedy_within_submodular_band(rng):
    for _ in range(20):
        m = int(rng.integers(3, 9))
        dom = FiniteDomain(rng.uniform(-1, 1, (m, 2)))
        k = KernelSpec(str(rng.choice(["se", "matern52", "linear"])), float(rng.uniform(0.2, 2)),
                       float(rng.uniform(0.2, 2)))
        for budget in range(1, min(4, m) + 1):
            g = greedy_gamma(k, 0.1, dom, budget).value
            e = exact_gamma(k, 0.1, dom, budget).value
            assert ONE_MINUS_INV_E * e - 1e-12 <= g <= e + 1e-12


def test_difference_kernel_carries_less_information():
    dom = FiniteDomain.grid(-1, 1, 60, 2)
    kd = KernelSpec("se", 0.8, 1.0)
    kf = KernelSpec("matern52", 1.0, 1.2) + kd
    assert greedy_gamma(kd, 0.01, dom, 30).value < greedy_gamma(kf, 0.01, dom, 30).value


def test_prop1_values():
    assert prop1_bound("linear", 1.0, 1, 2) == pytest.approx(2.6931471805599454, abs=1e-14)
    for fam in ("linear", "se", "matern"):
        assert prop1_bound(fam, 1e-15, 50, 2) < 1e-12
    k = 3.0
    lead = prop1_bound("se", 1.0, math.exp(k), 2, c2=0.0)
    assert lead == pytest.approx(k**3, rel=1e-12)
    with pytest.raises(ValueError):
        prop1_bound("matern", 1.0, 10, 2, smoothness=1.0)


def test_bounds_degenerate_when_source_small():
    assert source_variance_bound(10.0, 0.1, 20) == math.inf
    assert source_variance_bound(1.0, 0.1, 12) == pytest.approx(0.02)
    assert regret_bound(10, 2.0, 10.0, 1.0, 20, 0.1, 0.01, 0.8) == math.inf
    assert math.isfinite(regret_bound(10, 2.0, 1.0, 1.0, 20, 0.1, 0.01, 0.8))
