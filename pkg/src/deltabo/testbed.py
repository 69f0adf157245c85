"""Finite decision sets, synthetic source/target pairs and search-space encoding."""
from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .gp import DEFAULT_FACTOR_CAP, sample_prior_function
from .kernels import KernelSpec, as_points



@dataclass(frozen=True)
class FiniteDomain:
    """Ordered, distinct points in R^d. All optimization is over indices."""

    points: np.ndarray
    bounds: tuple | None = None
    resolution: int | None = None

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise ValueError("a domain needs at least one point")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("domain points must be distinct")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def grid(cls, lower, upper, resolution: int, dim: int | None = None) -> "FiniteDomain":
        """Uniform grid with ``resolution`` points per axis, row-major (axis 0 slowest).

        ``lower``/``upper`` are scalars (then ``dim`` is required) or per-axis
        sequences.
        """
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if dim is None:
            dim = max(lo.size, hi.size)
        lo = np.broadcast_to(lo, (dim,))
        hi = np.broadcast_to(hi, (dim,))
        if np.any(hi < lo) or (resolution > 1 and np.any(hi == lo)):
            raise ValueError("grid bounds must satisfy lower < upper")
        axes = [np.linspace(lo[k], hi[k], resolution) for k in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return cls(pts, tuple(zip(lo.tolist(), hi.tolist())), resolution)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, i):
        return self.points[i]

    def digest(self) -> str:
        return hashlib.sha256(self.points.tobytes()).hexdigest()


@dataclass(frozen=True)
class ObjectivePair:
    """Source ``g`` and target ``f`` tabulated on a domain, with ``delta = f - g``."""

    domain: FiniteDomain
    g: np.ndarray
    f: np.ndarray
    name: str = "pair"
    delta: np.ndarray = field(init=False)
    f_star: float = field(init=False)
    x_star_index: int = field(init=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=float).ravel()
        f = np.array(self.f, dtype=float).ravel()
        m = len(self.domain)
        if g.shape[0] != m or f.shape[0] != m:
            raise ValueError(f"g and f need one value per domain point ({m})")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(f))):
            raise ValueError("objective values must be finite")
        delta = f - g
        for a in (g, f, delta):
            a.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "delta", delta)
        idx = int(np.argmax(f))
        object.__setattr__(self, "x_star_index", idx)
        object.__setattr__(self, "f_star", float(f[idx]))

    def negated(self) -> "ObjectivePair":
        return ObjectivePair(self.domain, -self.g, -self.f, self.name + "_neg")

    def regret(self, index: int) -> float:
        return self.f_star - float(self.f[index])


# ---------------------------------------------------------------------------
# synthetic pairs
# ---------------------------------------------------------------------------


def gaussian_pair_domain(mu: float = 0.0, shift: float = 1.0, dim: int = 2,
                         resolution: int = 100) -> FiniteDomain:
    """Default grid for the shifted-Gaussian pair: ``[mu - 3, mu' + 3]^dim``."""
    mu_src = mu + shift / math.sqrt(dim)
    lo, hi = min(mu, mu_src) - 3.0, max(mu, mu_src) + 3.0
    return FiniteDomain.grid(lo, hi, resolution, dim)


def make_gaussian_pair(domain: FiniteDomain, mu: float = 0.0, shift: float = 1.0) -> ObjectivePair:
    """Gaussian bumps at ``mu * 1`` (target) and ``(mu + shift/sqrt(d)) * 1`` (source)."""
    x = domain.points
    n = domain.dim
    mu_src = mu + shift / math.sqrt(n)
    g = np.exp(-0.5 * np.sum((x - mu_src) ** 2, axis=1))
    f = np.exp(-0.5 * np.sum((x - mu) ** 2, axis=1))
    return ObjectivePair(domain, g, f, "gaussian")


def bohachevsky_source(x: np.ndarray) -> np.ndarray:
    x1, x2 = x[..., 0], x[..., 1]
    return x1**2 + 2 * x2**2 - 0.3 * np.cos(3 * np.pi * x1) - 0.4 * np.cos(4 * np.pi * x2) + 0.7


def bohachevsky_target(x: np.ndarray) -> np.ndarray:
    x1, x2 = x[..., 0], x[..., 1]
    return x1**2 + 2 * x2**2 - 0.3 * np.cos(3 * np.pi * x1) * np.cos(4 * np.pi * x2) + 0.3


def make_bohachevsky_pair(domain: FiniteDomain | None = None) -> ObjectivePair:
    """Bohachevsky source/target on ``domain`` (default: 120 x 120 grid on [-2, 2]^2).

    Values are the raw minimization-shaped surfaces; use
    :meth:`ObjectivePair.negated` to maximize.
    """
    if domain is None:
        domain = FiniteDomain.grid(-2.0, 2.0, 120, 2)
    if domain.dim != 2:
        raise ValueError("Bohachevsky functions are defined in two dimensions")
    if domain.bounds != ((-2.0, 2.0), (-2.0, 2.0)) or domain.resolution != 120:
        warnings.warn("Bohachevsky pair built on a non-standard grid", stacklevel=2)
    x = domain.points
    return ObjectivePair(domain, bohachevsky_source(x), bohachevsky_target(x), "bohachevsky")


def make_assumption_satisfied_pair(
    domain: FiniteDomain,
    seed,
    kernel_g: KernelSpec = KernelSpec("matern52", 1.0, 1.2),
    kernel_delta: KernelSpec = KernelSpec("se", 0.8, 1.0),
    cap: int = DEFAULT_FACTOR_CAP,
) -> ObjectivePair:
    """Draw ``g ~ GP(0, k_g)`` and ``delta ~ GP(0, k_delta)`` independently; ``f = g + delta``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_g, s_d = ss.spawn(2)
    g = sample_prior_function(kernel_g, domain, s_g, cap)
    d = sample_prior_function(kernel_delta, domain, s_d, cap)
    return ObjectivePair(domain, g, g + d, "assumption_satisfied")


def query_objective(pair: ObjectivePair, index: int, sigma2: float, rng) -> float:
    """Noisy target evaluation ``f[index] + N(0, sigma2)``."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    return float(pair.f[index]) + math.sqrt(sigma2) * float(rng.standard_normal())


# ---------------------------------------------------------------------------
# pair files
# ---------------------------------------------------------------------------


def write_pair_file(pair: ObjectivePair, path) -> None:
    """One record per domain point: ``index, x0..x{d-1}, g, f``."""
    d = pair.domain.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [f"x{k}" for k in range(d)] + ["g", "f"])
        for i in range(len(pair.domain)):
            row = [i] + [repr(float(v)) for v in pair.domain.points[i]]
            w.writerow(row + [repr(float(pair.g[i])), repr(float(pair.f[i]))])


def read_pair_file(path, name: str = "file") -> ObjectivePair:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "index" or header[-2:] != ["g", "f"]:
        raise ValueError(f"{path}: unexpected header {header}")
    d = len(header) - 3
    idx = np.array([int(r[0]) for r in body])
    if not np.array_equal(idx, np.arange(len(body))):
        raise ValueError(f"{path}: indices must be 0..n-1 in order")
    data = np.array([[float(v) for v in r[1:]] for r in body])
    return ObjectivePair(FiniteDomain(data[:, :d]), data[:, d], data[:, d + 1], name)


# ---------------------------------------------------------------------------
# black-box plug-ins
# ---------------------------------------------------------------------------


class BlackBoxPair(Protocol):
    """External source/target objectives over a finite domain.

    The optimum is unknown, so the harness reports best observed values
    instead of regret. Implementations own their noise.
    """

    domain: FiniteDomain

    def source(self, index: int) -> float: ...

    def target(self, index: int) -> float: ...


# ---------------------------------------------------------------------------
# hyperparameter box encoding
# ---------------------------------------------------------------------------

BOX_LOW, BOX_HIGH = 0.0, 10.0


@dataclass(frozen=True)
class Categorical:
    options: tuple

    def __post_init__(self):
        if len(self.options) == 0:
            raise ValueError("categorical coordinate needs at least one option")
        object.__setattr__(self, "options", tuple(self.options))

    def encode(self, option) -> float:
        k = len(self.options)
        i = self.options.index(option)
        width = (BOX_HIGH - BOX_LOW) / k
        return BOX_LOW + (i + 0.5) * width

    def decode(self, z: float):
        k = len(self.options)
        width = (BOX_HIGH - BOX_LOW) / k
        # intervals are [lo, hi) except the last, which is closed
        i = int(math.floor((z - BOX_LOW) / width))
        return self.options[min(max(i, 0), k - 1)]


@dataclass(frozen=True)
class Continuous:
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError(f"degenerate continuous bounds [{self.low}, {self.high}]")

    def encode(self, v: float) -> float:
        return BOX_LOW + (v - self.low) * (BOX_HIGH - BOX_LOW) / (self.high - self.low)

    def decode(self, z: float) -> float:
        return self.low + (z - BOX_LOW) * (self.high - self.low) / (BOX_HIGH - BOX_LOW)


@dataclass(frozen=True)
class HyperparameterBox:
    """Map a mixed search space onto ``[0, 10]^d`` and back."""

    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def encode(self, values: Sequence) -> np.ndarray:
        if len(values) != self.dim:
            raise ValueError(f"expected {self.dim} values, got {len(values)}")
        return np.array([c.encode(v) for c, v in zip(self.coords, values)])

    def decode(self, z) -> list:
        z = np.asarray(z, dtype=float).ravel()
        if z.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {z.shape[0]}")
        return [c.decode(float(v)) for c, v in zip(self.coords, z)]


def encode_hyperparameters(space: Sequence) -> HyperparameterBox:
    """Build a :class:`HyperparameterBox` from a space description.

    Each entry is either a list/tuple of options (categorical), a
    ``(low, high)`` pair of numbers tagged ``{"low": .., "high": ..}``, or an
    already-built :class:`Categorical`/:class:`Continuous`.
    """
    coords = []
    for item in space:
        if isinstance(item, (Categorical, Continuous)):
            coords.append(item)
        elif isinstance(item, dict) and "options" in item:
            coords.append(Categorical(tuple(item["options"])))
        elif isinstance(item, dict):
            coords.append(Continuous(float(item["low"]), float(item["high"])))
        elif isinstance(item, (list, tuple)):
            coords.append(Categorical(tuple(item)))
        else:
            raise TypeError(f"cannot interpret search-space entry {item!r}")
    return HyperparameterBox(tuple(coords))
