"""Covariance functions and kernel-matrix assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _accel

FAMILIES = {"linear": _accel.LINEAR, "se": _accel.SE, "matern52": _accel.MATERN52}

JITTER = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """One isotropic covariance function ``tau2 * kbar(x, x')``.

    ``family`` is one of ``"linear"``, ``"se"`` or ``"matern52"``. The
    lengthscale is ignored by the linear family.
    """

    family: str
    tau2: float = 1.0
    lengthscale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {sorted(FAMILIES)}"
            )
        if not (math.isfinite(self.tau2) and self.tau2 > 0):
            raise ValueError(f"tau2 must be a positive finite number, got {self.tau2}")
        if not (math.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")

    @property
    def code(self) -> int:
        return FAMILIES[self.family]

    @property
    def stationary(self) -> bool:
        return self.family != "linear"

    def scaled(self, tau2: float) -> "KernelSpec":
        return KernelSpec(self.family, tau2, self.lengthscale)

    def __add__(self, other):
        return SumKernel((self,)) + other


@dataclass(frozen=True)
class SumKernel:
    """Sum of independent covariance functions, e.g. ``k_f = k_g + k_delta``."""

    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("SumKernel needs at least one part")

    def __add__(self, other):
        extra = other.parts if isinstance(other, SumKernel) else (other,)
        return SumKernel(tuple(self.parts) + tuple(extra))

    @property
    def stationary(self) -> bool:
        return all(p.stationary for p in self.parts)


Kernel = Union[KernelSpec, SumKernel]


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce to a C-contiguous float64 ``(n, d)`` array and validate it."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"points must be 2-D (n, d), got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain non-finite coordinates")
    return np.ascontiguousarray(arr)


def _parts(kernel: Kernel):
    return kernel.parts if isinstance(kernel, SumKernel) else (kernel,)


def eval_kernel(kernel: Kernel, x, x_prime) -> float:
    """Covariance between two single points."""
    x = np.asarray(x, dtype=float).ravel()
    xp = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != xp.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {xp.shape[0]}")
    a = as_points(x[None, :])
    b = as_points(xp[None, :])
    return float(cross_kernel(kernel, a, b)[0, 0])


def cross_kernel(kernel: Kernel, a, b) -> np.ndarray:
    """Matrix ``[k(a_i, b_j)]`` between two point sets."""
    a = as_points(a)
    b = as_points(b, dim=a.shape[1])
    out = None
    for p in _parts(kernel):
        m = _accel.cross_kernel(p.code, float(p.tau2), float(p.lengthscale), a, b)
        out = m if out is None else out + m
    return out


def build_kernel_matrix(kernel: Kernel, points) -> np.ndarray:
    """Exactly symmetric kernel matrix over ``points``."""
    pts = as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("build_kernel_matrix needs at least one point")
    out = None
    for p in _parts(kernel):
        m = _accel.sym_kernel(p.code, float(p.tau2), float(p.lengthscale), pts)
        out = m if out is None else out + m
    return out


def kernel_diag(kernel: Kernel, points) -> np.ndarray:
    """``k(x, x)`` for every row of ``points`` without building the full matrix."""
    pts = as_points(points)
    out = np.zeros(pts.shape[0])
    for p in _parts(kernel):
        if p.family == "linear":
            out += p.tau2 * np.einsum("ij,ij->i", pts, pts)
        else:
            out += p.tau2
    return out


def jittered_cholesky(matrix: np.ndarray, jitter: float = JITTER, max_tries: int = 6,
                      relative: bool = False):
    """Lower Cholesky factor of ``matrix + jitter * I``.

    With ``relative`` the jitter is scaled by the mean diagonal, so tiny
    amplitudes are not swamped. The jitter grows tenfold per failed attempt. Raises
    :class:`numpy.linalg.LinAlgError` with a condition estimate when every
    attempt fails.
    """
    n = matrix.shape[0]
    eye = np.eye(n)
    j = jitter
    if relative:
        scale = float(np.mean(np.diag(matrix))) if n else 0.0
        j = jitter * scale if scale > 0 else jitter
    for _ in range(max_tries):
        try:
            return np.linalg.cholesky(matrix + j * eye), j
        except np.linalg.LinAlgError:
            j *= 10.0
    cond = np.linalg.cond(matrix)
    raise np.linalg.LinAlgError(
        f"matrix not positive definite after jitter up to {j / 10:g} "
        f"(condition estimate {cond:.3e}, size {n})"
    )
