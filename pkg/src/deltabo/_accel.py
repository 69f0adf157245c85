"""Hot numeric loops, in two interchangeable flavours.

Every routine here exists twice: a pure-numpy version (``*_np``) and a
numba ``@njit`` version (``*_nb``). The public names (``cross_kernel``,
``sym_kernel``, ``extend_rows``, ``ucb_argmax``, ``delta_ucb_argmax``) are
bound at import time to the numba flavour unless the environment variable
``DELTABO_NO_NUMBA`` is set to a truthy value or numba fails to import.

Kernel family codes: 0 = linear, 1 = squared exponential, 2 = Matérn-5/2.
"""
from __future__ import annotations

import math
import os

import numpy as np

LINEAR, SE, MATERN52 = 0, 1, 2

_SQRT5 = math.sqrt(5.0)


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap


USE_NUMBA = HAVE_NUMBA and not _flag("DELTABO_NO_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy flavour
# ---------------------------------------------------------------------------


def _sqdist_np(a, b):
    out = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        diff = a[:, k, None] - b[None, :, k]
        out += diff * diff
    return out


def _apply_np(family, tau2, ell, a, b):
    if family == LINEAR:
        return tau2 * (a @ b.T)
    d2 = _sqdist_np(a, b)
    if family == SE:
        return tau2 * np.exp(-d2 / (2.0 * ell * ell))
    r = np.sqrt(d2) / ell
    return tau2 * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-_SQRT5 * r)


def cross_kernel_np(family, tau2, ell, a, b):
    return _apply_np(family, tau2, ell, a, b)


def sym_kernel_np(family, tau2, ell, a):
    m = _apply_np(family, tau2, ell, a, a)
    # mirror the upper triangle so the result is exactly symmetric
    iu = np.triu_indices(a.shape[0], 1)
    m[(iu[1], iu[0])] = m[iu]
    return m


def extend_rows_np(k_new, l_vec, v_rows, pivot, alpha_new, mean, var):
    if v_rows.shape[0]:
        row = (k_new - l_vec @ v_rows) / pivot
    else:
        row = k_new / pivot
    mean += row * alpha_new
    var -= row * row
    return row


TIE_RTOL = 1e-9


def first_near_max(score) -> int:
    """Lowest index whose score is within a relative ``TIE_RTOL`` of the maximum.

    Symmetric domains produce exact ties in exact arithmetic; the tolerance keeps
    the pick independent of last-bit rounding (and hence of the backend).
    """
    score = np.asarray(score)
    top = score.max()
    if not np.isfinite(top):
        return int(np.argmax(score))
    return int(np.argmax(score >= top - TIE_RTOL * max(1.0, abs(top))))


def ucb_argmax_np(mean, var, beta):
    score = mean + math.sqrt(beta) * np.sqrt(np.maximum(var, 0.0))
    return first_near_max(score), score


def delta_ucb_argmax_np(mu_g, var_g, mu_d, var_d, beta):
    score = mu_g + mu_d + math.sqrt(beta) * np.sqrt(np.maximum(var_g + var_d, 0.0))
    return first_near_max(score), score


# ---------------------------------------------------------------------------
# numba flavour
# ---------------------------------------------------------------------------


@njit(cache=True)
def _kval_nb(family, tau2, ell, a, i, b, j):
    dim = a.shape[1]
    if family == 0:
        s = 0.0
        for k in range(dim):
            s += a[i, k] * b[j, k]
        return tau2 * s
    d2 = 0.0
    for k in range(dim):
        diff = a[i, k] - b[j, k]
        d2 += diff * diff
    if family == 1:
        return tau2 * math.exp(-d2 / (2.0 * ell * ell))
    r = math.sqrt(d2) / ell
    return tau2 * (1.0 + 2.23606797749979 * r + (5.0 / 3.0) * r * r) * math.exp(
        -2.23606797749979 * r
    )


@njit(cache=True)
def cross_kernel_nb(family, tau2, ell, a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = _kval_nb(family, tau2, ell, a, i, b, j)
    return out


@njit(cache=True)
def sym_kernel_nb(family, tau2, ell, a):
    n = a.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v = _kval_nb(family, tau2, ell, a, i, a, j)
            out[i, j] = v
            out[j, i] = v
    return out


@njit(cache=True)
def extend_rows_nb(k_new, l_vec, v_rows, pivot, alpha_new, mean, var):
    t, m = v_rows.shape
    row = k_new.copy()
    if t:
        row -= np.dot(l_vec, v_rows)  # BLAS gemv; loops lose to it here
    for j in range(m):
        s = row[j] / pivot
        row[j] = s
        mean[j] += s * alpha_new
        var[j] -= s * s
    return row


@njit(cache=True)
def _ucb_nb(mean, var, beta):
    sb = math.sqrt(beta)
    m = mean.shape[0]
    score = np.empty(m)
    best = 0
    for j in range(m):
        v = var[j]
        if v < 0.0:
            v = 0.0
        score[j] = mean[j] + sb * math.sqrt(v)
        if score[j] > score[best]:
            best = j
    return best, score


@njit(cache=True)
def _delta_ucb_nb(mu_g, var_g, mu_d, var_d, beta):
    sb = math.sqrt(beta)
    m = mu_g.shape[0]
    score = np.empty(m)
    best = 0
    for j in range(m):
        v = var_g[j] + var_d[j]
        if v < 0.0:
            v = 0.0
        score[j] = mu_g[j] + mu_d[j] + sb * math.sqrt(v)
        if score[j] > score[best]:
            best = j
    return best, score


def ucb_argmax_nb(mean, var, beta):
    _, score = _ucb_nb(mean, var, float(beta))
    return first_near_max(score), score


def delta_ucb_argmax_nb(mu_g, var_g, mu_d, var_d, beta):
    _, score = _delta_ucb_nb(mu_g, var_g, mu_d, var_d, float(beta))
    return first_near_max(score), score


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    cross_kernel = cross_kernel_nb
    sym_kernel = sym_kernel_nb
    extend_rows = extend_rows_nb
    ucb_argmax = ucb_argmax_nb
    delta_ucb_argmax = delta_ucb_argmax_nb
else:
    cross_kernel = cross_kernel_np
    sym_kernel = sym_kernel_np
    extend_rows = extend_rows_np
    ucb_argmax = ucb_argmax_np
    delta_ucb_argmax = delta_ucb_argmax_np
