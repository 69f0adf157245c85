"""Seeded replications of every configured algorithm on one objective.

Randomness is matched within a replication: every algorithm sees the same
world, source data, initial target observations and per-round noise draws.
All streams come from ``SeedSequence(seed, spawn_key=(replication, purpose))``.
"""
from __future__ import annotations

import importlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import DiffGPStyle, EnvGPStyle, TargetGP
from ..gp import Dataset
from ..testbed import (
    FiniteDomain,
    ObjectivePair,
    gaussian_pair_domain,
    make_assumption_satisfied_pair,
    make_bohachevsky_pair,
    make_gaussian_pair,
    read_pair_file,
)
from ..trace import RAW_HEADER, RegretTrace, RoundRecord, run_loop
from ..transfer import DeltaBO, build_source_model
from .config import ALGORITHMS, ExperimentConfig

log = logging.getLogger(__name__)

WORLD, SOURCE, INIT, NOISE = 0, 1, 2, 3
ALGO_STREAM_BASE = 100

OUTPUT_ENV = "DELTABO_OUTPUT_DIR"


class ExperimentAborted(RuntimeError):
    pass


def stream(seed: int, replication: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication, purpose)))


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


def build_domain(cfg: ExperimentConfig) -> FiniteDomain:
    res = cfg.effective_resolution
    kind = cfg.objective_kind
    if kind == "gaussian" and cfg.domain_lower is None and cfg.domain_upper is None:
        return gaussian_pair_domain(cfg.objective["mu"], cfg.objective["shift"], cfg.dim, res)
    defaults = {"bohachevsky": (-2.0, 2.0)}.get(kind, (-1.0, 1.0))
    lo = defaults[0] if cfg.domain_lower is None else cfg.domain_lower
    hi = defaults[1] if cfg.domain_upper is None else cfg.domain_upper
    dim = 2 if kind == "bohachevsky" else cfg.dim
    return FiniteDomain.grid(lo, hi, res, dim)


def load_plugin(spec: str):
    module, _, attr = spec.partition(":")
    if not attr:
        raise ValueError(f"plugin spec must look like 'module:factory', got {spec!r}")
    return getattr(importlib.import_module(module), attr)


def build_objective(cfg: ExperimentConfig, replication: int = 0):
    """The objective pair for one replication (or a black-box plug-in)."""
    kind = cfg.objective_kind
    if kind == "pair_file":
        pair = read_pair_file(cfg.objective["path"])
    elif kind == "plugin":
        return load_plugin(cfg.objective["plugin"])(cfg)
    else:
        domain = build_domain(cfg)
        if kind == "assumption_satisfied":
            ss = np.random.SeedSequence(cfg.seed, spawn_key=(replication, WORLD))
            pair = make_assumption_satisfied_pair(
                domain, ss, cfg.objective["kernel_g"], cfg.objective["kernel_delta"], cfg.factor_cap)
        elif kind == "gaussian":
            pair = make_gaussian_pair(domain, cfg.objective["mu"], cfg.objective["shift"])
        else:
            pair = make_bohachevsky_pair(domain)
    return pair.negated() if cfg.objective["negate"] else pair


# ---------------------------------------------------------------------------
# one replication
# ---------------------------------------------------------------------------


@dataclass
class ReplicationResult:
    replication: int
    traces: list
    source_indices: list = field(default_factory=list)
    init_indices: list = field(default_factory=list)

    def meta(self) -> dict:
        return {
            "replication": self.replication,
            "source_indices": self.source_indices,
            "init_indices": self.init_indices,
            "traces": [
                {"algorithm": t.algorithm, "x_hat_index": t.x_hat_index,
                 "x_last_index": t.x_last_index, "failed": t.failed, "error": t.error,
                 "seconds": [r.seconds for r in t.records],
                 "best_observed": [r.best_observed for r in t.records]}
                for t in self.traces
            ],
        }


def _make_strategy(name: str, cfg: ExperimentConfig, domain: FiniteDomain, source_data: Dataset):
    a = cfg.algorithm(name)
    if name == "deltabo":
        source = build_source_model(a.kernels["kernel_g"], source_data, domain)
        return DeltaBO(source, a.kernels["kernel_delta"], domain, a.noise, a.beta,
                       a.options["delta_noise_mode"], a.options["delta_prior_variance"])
    if name.startswith("gp_"):
        return TargetGP(name[3:], a.kernels["kernel"], domain, a.noise, a.beta,
                        a.options.get("xi", 0.01))
    if name == "env_gp_style":
        return EnvGPStyle(a.kernels["kernel"], domain, a.noise, source_data,
                          a.options["env_noise_inflation"], a.beta)
    if name == "diff_gp_style":
        return DiffGPStyle(a.kernels["kernel"], domain, a.noise, source_data, a.beta)
    raise KeyError(name)


def run_replication(cfg: ExperimentConfig, replication: int) -> ReplicationResult:
    objective = build_objective(cfg, replication)
    domain = objective.domain
    m = len(domain)
    if cfg.n_source > m:
        raise ValueError(f"n_source={cfg.n_source} exceeds the domain size {m}")
    if cfg.n_init > m:
        raise ValueError(f"n_init={cfg.n_init} exceeds the domain size {m}")
    known = isinstance(objective, ObjectivePair)

    # nested across n_source: a prefix of one permutation and one noise vector
    src_rng = stream(cfg.seed, replication, SOURCE)
    perm = src_rng.permutation(m)
    z_src = src_rng.standard_normal(m)
    src_idx = perm[: cfg.n_source]
    if known:
        src_y = objective.g[src_idx] + math.sqrt(cfg.sigma0_sq) * z_src[: cfg.n_source]
    else:
        src_y = np.array([objective.source(int(i)) for i in src_idx])
    source_data = Dataset.homoscedastic(domain.points[src_idx], src_y, cfg.sigma0_sq, src_idx)

    init_rng = stream(cfg.seed, replication, INIT)
    init_idx = init_rng.choice(m, size=cfg.n_init, replace=False) if cfg.n_init else np.zeros(0, int)
    z_init = init_rng.standard_normal(cfg.n_init)
    if known:
        init_y = objective.f[init_idx] + math.sqrt(cfg.sigma2) * z_init
    else:
        init_y = np.array([objective.target(int(i)) for i in init_idx])
    noise_z = stream(cfg.seed, replication, NOISE).standard_normal(cfg.horizon)
    best0 = float(np.max(init_y)) if len(init_y) else -math.inf

    traces = []
    for a in cfg.algorithms:
        rng = stream(cfg.seed, replication, ALGO_STREAM_BASE + ALGORITHMS.index(a.name))
        try:
            strat = _make_strategy(a.name, cfg, domain, source_data)
            strat.prime(init_idx, init_y)
        except Exception as exc:  # noqa: BLE001 - recorded, experiment continues
            log.warning("replication %d, %s: setup failed: %s", replication, a.name, exc)
            traces.append(RegretTrace(a.name, replication, failed=True,
                                      error=f"setup: {type(exc).__name__}: {exc}"))
            continue
        tr = run_loop(strat, objective, cfg.horizon, cfg.sigma2, noise_z, rng, replication, best0)
        if tr.failed:
            log.warning("replication %d, %s failed: %s", replication, a.name, tr.error)
        traces.append(tr)
    return ReplicationResult(replication, traces, [int(i) for i in src_idx],
                             [int(i) for i in init_idx])


# ---------------------------------------------------------------------------
# persistence of individual replications
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def rep_paths(out_dir: Path, replication: int):
    base = out_dir / "traces" / f"rep_{replication:04d}"
    return base.with_suffix(".csv"), base.with_suffix(".json")


def write_replication(out_dir: Path, res: ReplicationResult, cfg: ExperimentConfig) -> None:
    csv_path, meta_path = rep_paths(out_dir, res.replication)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(RAW_HEADER)]
    for tr in res.traces:
        lines.extend(",".join(_fmt(v) for v in row) for row in tr.rows())
    meta = res.meta()
    meta["config_hash"] = cfg.config_hash
    meta["seed"] = cfg.seed
    # write-then-rename so a crash never leaves a half-written replication
    for path, text in ((csv_path, "\n".join(lines) + "\n"), (meta_path, json.dumps(meta, indent=1))):
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)


def read_replication(out_dir: Path, replication: int, cfg: ExperimentConfig):
    """Load a stored replication if it was produced by the same config and seed."""
    csv_path, meta_path = rep_paths(out_dir, replication)
    if not (csv_path.exists() and meta_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    if meta.get("config_hash") != cfg.config_hash or meta.get("seed") != cfg.seed:
        return None
    rows = csv_path.read_text().splitlines()[1:]
    by_alg: dict = {}
    for line in rows:
        f = line.split(",")
        by_alg.setdefault(f[0], []).append(f)
    traces = []
    for tm in meta["traces"]:
        tr = RegretTrace(tm["algorithm"], replication, x_hat_index=tm["x_hat_index"],
                         x_last_index=tm["x_last_index"], failed=tm["failed"], error=tm["error"])
        for k, f in enumerate(by_alg.get(tm["algorithm"], [])):
            num = [float(x) if x else math.nan for x in f[4:8]]
            tr.records.append(RoundRecord(int(f[2]), int(f[3]), num[0], num[1], num[2], num[3],
                                          tm["best_observed"][k], tm["seconds"][k]))
        traces.append(tr)
    return ReplicationResult(replication, traces, meta["source_indices"], meta["init_indices"])


# ---------------------------------------------------------------------------
# whole experiment
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replications: list

    @property
    def traces(self) -> list:
        return [t for r in self.replications for t in r.traces]

    def failures(self) -> list:
        return [(t.algorithm, t.replication, t.error) for t in self.traces if t.failed]


def _safe_replication(cfg: ExperimentConfig, rep: int) -> ReplicationResult:
    try:
        return run_replication(cfg, rep)
    except Exception as exc:  # noqa: BLE001 - whole replication marked failed
        log.warning("replication %d failed: %s", rep, exc)
        err = f"replication: {type(exc).__name__}: {exc}"
        return ReplicationResult(rep, [RegretTrace(a.name, rep, failed=True, error=err)
                                       for a in cfg.algorithms])


def _worker(args):
    cfg, rep = args
    return _safe_replication(cfg, rep)


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int | None = None,
                   resume: bool = True) -> ExperimentResult:
    """Run every replication; persist each as soon as it completes.

    With ``out_dir`` set, replications already on disk from the same config
    and seed are loaded instead of recomputed.
    """
    out = Path(out_dir) if out_dir is not None else None
    workers = workers or cfg.workers
    results: dict = {}
    todo = []
    for rep in range(cfg.replications):
        stored = read_replication(out, rep, cfg) if (out is not None and resume) else None
        if stored is not None:
            results[rep] = stored
        else:
            todo.append(rep)

    def _collect(res: ReplicationResult):
        results[res.replication] = res
        if out is not None:
            write_replication(out, res, cfg)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_worker, [(cfg, r) for r in todo]):
                _collect(res)
    else:
        for rep in todo:
            _collect(_safe_replication(cfg, rep))

    result = ExperimentResult(cfg, [results[r] for r in range(cfg.replications)])
    n_total = len(result.traces)
    n_failed = len(result.failures())
    if n_total and n_failed / n_total >= cfg.failure_abort_fraction:
        lines = "\n".join(f"  {a} rep {r}: {e}" for a, r, e in result.failures()[:20])
        raise ExperimentAborted(f"{n_failed}/{n_total} runs failed:\n{lines}")
    return result


def default_output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output_dir)
