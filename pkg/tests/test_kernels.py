import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deltabo import _accel
from deltabo.kernels import (KernelSpec, SumKernel, build_kernel_matrix, cross_kernel,
                             eval_kernel, jittered_cholesky, kernel_diag)

from conftest import dense_kernel

finite = st.floats(-5, 5, allow_nan=False)
point2 = st.tuples(finite, finite)
family = st.sampled_from(["linear", "se", "matern52"])


def test_se_at_zero_distance():
    assert eval_kernel(KernelSpec("se"), [0.3, -1.0], [0.3, -1.0]) == 1.0


def test_se_unit_diagonal_offset():
    # exp(-1) to 16 digits
    assert eval_kernel(KernelSpec("se"), [0, 0], [1, 1]) == pytest.approx(0.36787944117144233, rel=1e-14)


def test_matern_at_unit_distance():
    # (1 + sqrt5 + 5/3) exp(-sqrt5)
    assert eval_kernel(KernelSpec("matern52"), [0.0], [1.0]) == pytest.approx(0.5239941088318203, rel=1e-14)


def test_linear_gram():
    k = build_kernel_matrix(KernelSpec("linear"), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(k, [[5, 11], [11, 25]])


def test_single_point_and_duplicates():
    np.testing.assert_array_equal(build_kernel_matrix(KernelSpec("se"), [[0.4, 2.0]]), [[1.0]])
    np.testing.assert_array_equal(build_kernel_matrix(KernelSpec("se"), [[1.0], [1.0]]), np.ones((2, 2)))


def test_rejects_bad_specs():
    with pytest.raises(ValueError):
        KernelSpec("rbf")
    with pytest.raises(ValueError):
        KernelSpec("se", tau2=0.0)
    with pytest.raises(ValueError):
        KernelSpec("se", lengthscale=-1.0)


def test_rejects_nonfinite_and_dim_mismatch():
    with pytest.raises(ValueError):
        eval_kernel(KernelSpec("se"), [np.nan, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        eval_kernel(KernelSpec("se"), [0.0, 0.0], [0.0])
    with pytest.raises(ValueError):
        build_kernel_matrix(KernelSpec("se"), np.zeros((0, 2)))


@pytest.mark.parametrize("fam", ["linear", "se", "matern52"])
def test_matches_closed_form_oracle(fam, rng):
    spec = KernelSpec(fam, 1.7, 0.6)
    a, b = rng.normal(size=(7, 3)), rng.normal(size=(5, 3))
    np.testing.assert_allclose(cross_kernel(spec, a, b), dense_kernel(fam, 1.7, 0.6)(a, b), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(kernel_diag(spec, a), np.diag(dense_kernel(fam, 1.7, 0.6)(a, a)), rtol=1e-12)


def test_sum_kernel_adds():
    k1, k2 = KernelSpec("matern52", 1.0, 1.2), KernelSpec("se", 0.8, 1.0)
    s = k1 + k2
    assert isinstance(s, SumKernel)
    x, y = [0.1, 0.2], [-0.5, 0.9]
    assert eval_kernel(s, x, y) == pytest.approx(eval_kernel(k1, x, y) + eval_kernel(k2, x, y), rel=1e-14)


@settings(max_examples=1000, deadline=None)
@given(family, point2, point2)
def test_symmetry_exact(fam, x, y):
    spec = KernelSpec(fam, 1.3, 0.8)
    assert eval_kernel(spec, x, y) == eval_kernel(spec, y, x)


@settings(max_examples=200, deadline=None)
@given(family, point2, point2, st.floats(1e-3, 1e3))
def test_amplitude_scaling(fam, x, y, c):
    base = eval_kernel(KernelSpec(fam, 1.0, 0.9), x, y)
    scaled = eval_kernel(KernelSpec(fam, c, 0.9), x, y)
    assert scaled == pytest.approx(c * base, rel=1e-12, abs=1e-300)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(["se", "matern52"]), point2, point2, st.floats(0.1, 5))
def test_stationary_kernels_bounded(fam, x, y, tau2):
    v = eval_kernel(KernelSpec(fam, tau2, 1.5), x, y)
    assert 0 < v <= tau2 or (v == 0 and np.linalg.norm(np.subtract(x, y)) > 20)


@settings(max_examples=100, deadline=None)
@given(family, st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_gram_factorizes_with_jitter(fam, n, seed):
    pts = np.random.default_rng(seed).uniform(-2, 2, (n, 2))
    k = build_kernel_matrix(KernelSpec(fam, 1.0, 0.7), pts)
    np.testing.assert_array_equal(k, k.T)
    chol, _ = jittered_cholesky(k)
    assert np.all(np.isfinite(chol))


def test_jitter_escalates_on_rank_deficient():
    k = build_kernel_matrix(KernelSpec("linear"), np.ones((5, 2)))
    chol, jitter = jittered_cholesky(k)
    assert jitter >= 1e-10
    np.testing.assert_allclose(chol @ chol.T, k + jitter * np.eye(5), atol=1e-12)


def test_backends_agree(rng):
    a, b = rng.normal(size=(30, 2)), rng.normal(size=(20, 2))
    for code in (_accel.LINEAR, _accel.SE, _accel.MATERN52):
        if _accel.HAVE_NUMBA:
            np.testing.assert_allclose(_accel.cross_kernel_nb(code, 1.1, 0.6, a, b),
                                       _accel.cross_kernel_np(code, 1.1, 0.6, a, b), rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(_accel.sym_kernel_nb(code, 1.1, 0.6, a),
                                       _accel.sym_kernel_np(code, 1.1, 0.6, a), rtol=1e-12, atol=1e-15)
