import numpy as np
import pytest

from deltabo import _accel
from deltabo.testbed import FiniteDomain, ObjectivePair
from deltabo.trace import run_loop


class Fixed:
    name = "fixed"

    def __init__(self, picks):
        self.picks = list(picks)
        self.seen = []

    def select(self, t, rng):
        return self.picks[t - 1]

    def observe(self, index, y):
        self.seen.append((index, y))


class Exploding(Fixed):
    def select(self, t, rng):
        if t == 3:
            raise FloatingPointError("boom")
        return super().select(t, rng)


def _pair():
    dom = FiniteDomain(np.arange(4.0).reshape(-1, 1))
    return ObjectivePair(dom, np.zeros(4), np.array([0.0, 1.0, 3.0, 2.0]))


def test_regret_accounting():
    tr = run_loop(Fixed([0, 1, 2, 3]), _pair(), 4, 0.0, np.zeros(4), np.random.default_rng(0))
    np.testing.assert_array_equal(tr.instantaneous, [3, 2, 0, 1])
    np.testing.assert_array_equal(tr.cumulative, [3, 5, 5, 6])
    np.testing.assert_array_equal(tr.average, [3, 2.5, 5 / 3, 1.5])
    assert tr.x_last_index == 3 and tr.x_hat_index in tr.queries


def test_noise_is_indexed_by_round():
    s = Fixed([1, 1])
    run_loop(s, _pair(), 2, 0.25, np.array([2.0, -1.0]), np.random.default_rng(0))
    assert s.seen == [(1, 2.0), (1, 0.5)]


def test_failure_is_flagged_and_truncated():
    tr = run_loop(Exploding([0, 1, 2, 3]), _pair(), 4, 0.0, np.zeros(4), np.random.default_rng(0))
    assert tr.failed and "round 3" in tr.error
    assert len(tr) == 2


def test_loop_validation():
    with pytest.raises(ValueError):
        run_loop(Fixed([0]), _pair(), 0, 0.0, np.zeros(1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        run_loop(Fixed([0, 0]), _pair(), 2, 0.0, np.zeros(1), np.random.default_rng(0))


def test_tie_break_lowest_index():
    assert _accel.first_near_max(np.array([1.0, 2.0, 2.0, 2.0 - 1e-13])) == 1
    idx, _ = _accel.ucb_argmax(np.zeros(3), np.ones(3), 1.0)
    assert idx == 0


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_backends_agree_on_hot_loops(rng):
    m = 200
    mu_g, mu_d = rng.normal(size=m), rng.normal(size=m)
    var_g, var_d = rng.uniform(0, 1, m), rng.uniform(0, 1, m)
    a = _accel.delta_ucb_argmax_np(mu_g, var_g, mu_d, var_d, 2.0)
    b = _accel.delta_ucb_argmax_nb(mu_g, var_g, mu_d, var_d, 2.0)
    assert a[0] == b[0]
    np.testing.assert_allclose(a[1], b[1], rtol=1e-14)
    n = 5
    v_rows = rng.normal(size=(n, m))
    l_vec = rng.normal(size=n)
    k_new = rng.normal(size=m)
    outs = []
    for fn in (_accel.extend_rows_np, _accel.extend_rows_nb):
        mean, var = mu_g.copy(), var_g.copy() + 5.0
        row = fn(k_new, l_vec, v_rows, 1.7, 0.3, mean, var)
        outs.append((row, mean, var))
    for x, y in zip(*outs):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-14)
