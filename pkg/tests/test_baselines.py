import numpy as np
import pytest

from deltabo.baselines import (DiffGPStyle, EnvGPStyle, TargetGP, diff_gp_run, env_gp_run,
                               expected_improvement, ei_select, gp_ucb_select, pi_select,
                               probability_of_improvement, target_gp_run, ts_select)
from deltabo.gp import Dataset, fit_posterior, sample_prior_function
from deltabo.kernels import KernelSpec
from deltabo.testbed import FiniteDomain, ObjectivePair, make_assumption_satisfied_pair
from deltabo.transfer import BetaSchedule, DeltaBO, build_source_model
from deltabo import _accel


def _line(n=5):
    return FiniteDomain(np.linspace(-1, 1, n).reshape(-1, 1))


def test_ucb_on_prior_picks_first():
    dom = _line()
    post = fit_posterior(KernelSpec("se"), Dataset.empty(1))
    assert gp_ucb_select(post, dom, 4.0) == 0


def test_ucb_scores_by_hand():
    idx, score = _accel.ucb_argmax(np.array([0.5, 0.0]), np.array([0.01, 0.16]), 4.0)
    np.testing.assert_allclose(score, [0.7, 0.8], atol=1e-15)
    assert idx == 1


def test_ucb_zero_beta_is_mean_argmax(rng):
    dom = _line(9)
    post = fit_posterior(KernelSpec("se", 1.0, 0.4), Dataset(dom.points[[1, 6]], [0.2, 0.9], [0.01, 0.01]))
    assert gp_ucb_select(post, dom, 0.0) == int(np.argmax(post.mean(dom.points)))
    with pytest.raises(ValueError):
        gp_ucb_select(post, dom, -0.1)


def test_ei_closed_form_values():
    assert expected_improvement([1.01], [1.0], 1.0, 0.01)[0] == pytest.approx(0.3989422804014327, abs=1e-14)
    doubled = expected_improvement([1.01, 1.01], [2.0, 4.0], 1.0, 0.01)
    np.testing.assert_allclose(doubled, 2 * expected_improvement([1.01, 1.01], [1.0, 2.0], 1.0, 0.01))
    # zero spread: improvement is the plain gap
    np.testing.assert_array_equal(expected_improvement([0.5, 2.0], [0.0, 0.0], 1.0, 0.0), [0.0, 1.0])


def test_pi_closed_form_values():
    assert probability_of_improvement([1.01], [0.3], 1.0, 0.01)[0] == 0.5
    assert probability_of_improvement([1.96 + 0.01], [1.0], 0.0, 0.01)[0] == pytest.approx(0.9750021048517795, abs=1e-12)
    np.testing.assert_array_equal(probability_of_improvement([0.5, 2.0], [0.0, 0.0], 1.0, 0.0), [0.0, 1.0])


def test_ei_pi_argmax_under_degenerate_posterior():
    dom = _line(4)
    post = fit_posterior(KernelSpec("se", 1.0, 0.01), Dataset(dom.points, [0.1, 0.4, 0.3, 0.2], [1e-12] * 4))
    assert ei_select(post, dom, 5.0) == 0
    assert pi_select(post, dom, 5.0) == 0


def test_ei_pi_agree_with_mean_when_spread_constant(rng):
    mean = rng.normal(size=20)
    std = np.full(20, 0.3)
    best = 0.1
    a = int(np.argmax(expected_improvement(mean, std, best, 0.0)))
    b = int(np.argmax(probability_of_improvement(mean, std, best, 0.0)))
    assert a == b == int(np.argmax(mean))


def test_pi_shift_invariance(rng):
    mean, std = rng.normal(size=15), rng.uniform(0.1, 1, 15)
    p = probability_of_improvement(mean, std, 0.2)
    q = probability_of_improvement(mean + 5.0, std, 5.2)
    assert int(np.argmax(p)) == int(np.argmax(q))


def test_ts_degenerate_and_seeded():
    dom = _line(4)
    post = fit_posterior(KernelSpec("se", 1.0, 0.01), Dataset(dom.points, [0.1, 0.4, 0.3, 0.2], [1e-12] * 4, np.arange(4)))
    assert ts_select(post, dom, np.random.default_rng(0)) == 1
    prior = fit_posterior(KernelSpec("se", 1.0, 0.5), Dataset.empty(1))
    picks = [ts_select(prior, _line(), np.random.default_rng(7)) for _ in range(3)]
    assert len(set(picks)) == 1


def test_ts_symmetric_prior_frequencies():
    dom = FiniteDomain(np.array([[0.0], [10.0], [20.0]]))
    prior = fit_posterior(KernelSpec("se", 1.0, 1.0), Dataset.empty(1))
    counts = np.bincount([ts_select(prior, dom, np.random.default_rng(s)) for s in range(2000)], minlength=3)
    np.testing.assert_allclose(counts / 2000, 1 / 3, atol=0.05)


def _toy(n=12, seed=3):
    dom = FiniteDomain.grid(-1, 1, n, 2)
    pair = make_assumption_satisfied_pair(dom, seed)
    r = np.random.default_rng(seed)
    idx = r.choice(len(dom), 30, replace=False)
    data = Dataset.homoscedastic(dom.points[idx], pair.g[idx] + 0.3 * r.standard_normal(30), 0.1, idx)
    return dom, pair, data


def test_env_gp_with_huge_inflation_matches_ucb():
    dom = FiniteDomain(np.linspace(-1, 1, 30).reshape(-1, 1))
    g = np.sin(3 * dom.points[:, 0])
    idx = np.arange(0, 30, 3)
    data = Dataset.homoscedastic(dom.points[idx], g[idx], 0.1, idx)
    # linear kernel: the prior UCB argmax is unique
    k = KernelSpec("linear")
    env = EnvGPStyle(k, dom, 0.01, data, 1e12)
    prior = fit_posterior(k, Dataset.empty(1))
    assert env.select(1, None) == gp_ucb_select(prior, dom, 0.2)


def test_env_gp_zero_inflation_is_warm_start():
    dom, pair, data = _toy()
    same = ObjectivePair(dom, pair.f, pair.f, "same")
    data = Dataset.homoscedastic(data.points, same.f[data.index], 0.01, data.index)
    k = KernelSpec("matern52", 1.0, 1.0)
    env = EnvGPStyle(k, dom, 0.01, data, 0.0)
    warm = TargetGP("ucb", k, dom, 0.01)
    warm.prime(data.index, data.values)
    np.testing.assert_allclose(env.post.domain_mean(), warm.post.domain_mean(), atol=1e-10)
    assert env.select(1, None) == warm.select(1, None)


def test_diff_gp_round_one_matches_deltabo():
    dom, pair, data = _toy()
    kd = KernelSpec("matern52", 1.0, 1.2)
    src = build_source_model(kd, data, dom)
    ours = DeltaBO(src, kd, dom, 0.01, BetaSchedule())
    diff = DiffGPStyle(kd, dom, 0.01, data, BetaSchedule())
    assert ours.select(1) == diff.select(1)
    ours.observe(5, 0.3)
    diff.observe(5, 0.3)
    assert ours.select(2) == diff.select(2)


@pytest.mark.parametrize("rule", ["ucb", "ei", "pi", "ts"])
def test_target_runs_deterministic_and_exact_length(rule):
    dom, pair, _ = _toy()
    init = ([0], [pair.f[0]])
    k = KernelSpec("matern52", 1.0, 1.0)
    a = target_gp_run(rule, pair, k, dom, 7, 0.01, seed=5, init=init)
    b = target_gp_run(rule, pair, k, dom, 7, 0.01, seed=5, init=init)
    assert len(a) == 7 and not a.failed
    assert list(a.rows()) == list(b.rows())


def test_transfer_stand_ins_deterministic():
    dom, pair, data = _toy()
    k = KernelSpec("matern52", 1.0, 1.0)
    for run in (lambda: env_gp_run(pair, data, k, dom, 5, 0.01, BetaSchedule(), 0.8, seed=2),
                lambda: diff_gp_run(pair, data, k, dom, 5, 0.01, BetaSchedule(), seed=2)):
        a, b = run(), run()
        assert len(a) == 5 and list(a.rows()) == list(b.rows())


def test_ei_needs_incumbent():
    dom, pair, _ = _toy()
    tr = target_gp_run("ei", pair, KernelSpec("se"), dom, 3, 0.01, seed=0)
    assert tr.failed and "prior observation" in tr.error


@pytest.mark.parametrize("seed", range(10))
def test_ucb_no_regret_trend_on_toy(seed):
    dom = FiniteDomain(np.linspace(0, 1, 50).reshape(-1, 1))
    k = KernelSpec("se", 1.0, 0.1)
    f = sample_prior_function(k, dom, seed)
    pair = ObjectivePair(dom, f, f, "toy")
    tr = target_gp_run("ucb", pair, k, dom, 50, 1e-6, BetaSchedule("constant", 2.0),
                       seed=0, noise_z=np.zeros(50))
    assert tr.average[-1] < 0.1 * (f.max() - f.min())
