"""Regret bookkeeping and the select/query/observe loop shared by every strategy."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .testbed import ObjectivePair

RAW_HEADER = (
    "algorithm",
    "replication",
    "t",
    "x_index",
    "y",
    "instantaneous_regret",
    "cumulative_regret",
    "average_regret",
)


@dataclass(frozen=True)
class RoundRecord:
    t: int
    x_index: int
    y: float
    regret: float
    cumulative: float
    average: float
    best_observed: float
    seconds: float


@dataclass
class RegretTrace:
    """Per-round record of one run of one algorithm.

    ``regret`` fields are NaN for black-box objectives whose optimum is
    unknown; ``best_observed`` is always filled.
    """

    algorithm: str
    replication: int = 0
    records: list = field(default_factory=list)
    x_hat_index: int | None = None
    x_last_index: int | None = None
    failed: bool = False
    error: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def cumulative(self) -> np.ndarray:
        return np.array([r.cumulative for r in self.records])

    @property
    def average(self) -> np.ndarray:
        return np.array([r.average for r in self.records])

    @property
    def instantaneous(self) -> np.ndarray:
        return np.array([r.regret for r in self.records])

    @property
    def queries(self) -> list:
        return [r.x_index for r in self.records]

    def rows(self):
        for r in self.records:
            yield (self.algorithm, self.replication, r.t, r.x_index, r.y,
                   r.regret, r.cumulative, r.average)


class Strategy(Protocol):
    """What the loop needs from an acquisition strategy."""

    name: str

    def select(self, t: int, rng: np.random.Generator) -> int: ...

    def observe(self, index: int, y: float) -> None: ...


class ObjectiveFailure(RuntimeError):
    pass


def _evaluate(objective, index: int, noise_z: float, sigma2: float) -> tuple:
    """Return ``(y, true_value_or_nan)``."""
    if isinstance(objective, ObjectivePair):
        fx = float(objective.f[index])
        return fx + math.sqrt(sigma2) * noise_z, fx
    y = float(objective.target(index))
    return y, math.nan


def run_loop(strategy, objective, horizon: int, sigma2: float, noise_z, rng,
             replication: int = 0, best_start: float = -math.inf) -> RegretTrace:
    """Run ``horizon`` rounds of select -> query -> observe.

    ``noise_z`` holds one standard-normal draw per round, shared across
    strategies of a replication so their traces differ only through their
    decisions. The output ``x_hat`` is drawn uniformly from the queries with
    ``rng`` after the last round.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    noise_z = np.asarray(noise_z, dtype=float)
    if noise_z.shape[0] < horizon:
        raise ValueError("need one noise draw per round")
    trace = RegretTrace(strategy.name, replication)
    known = isinstance(objective, ObjectivePair)
    cum = 0.0
    best = best_start
    for t in range(1, horizon + 1):
        tic = time.perf_counter()
        try:
            idx = int(strategy.select(t, rng))
            y, fx = _evaluate(objective, idx, float(noise_z[t - 1]), sigma2)
            if not math.isfinite(y):
                raise ObjectiveFailure(f"objective returned non-finite value {y} at index {idx}")
            strategy.observe(idx, y)
        except Exception as exc:  # noqa: BLE001 - recorded on the trace
            trace.failed = True
            trace.error = f"round {t}: {type(exc).__name__}: {exc}"
            return trace
        r = objective.f_star - fx if known else math.nan
        cum += r
        best = max(best, y)
        trace.records.append(RoundRecord(t, idx, y, r, cum, cum / t, best,
                                         time.perf_counter() - tic))
    queries = trace.queries
    trace.x_hat_index = int(queries[int(rng.integers(len(queries)))])
    trace.x_last_index = int(queries[-1])
    return trace
