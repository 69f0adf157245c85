"""Aggregation with normal-approximation confidence bands, and file emission."""
from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..trace import RAW_HEADER
from .. import __version__, _accel

Z95 = 1.96
METRICS = ("cumulative", "average", "best")


@dataclass(frozen=True)
class Aggregate:
    algorithm: str
    metric: str
    t: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    half_width: np.ndarray
    n: int

    @property
    def lower(self):
        return self.mean - self.half_width

    @property
    def upper(self):
        return self.mean + self.half_width


def ci_half_width(std, n: int):
    """``1.96 * std / sqrt(n)``."""
    return Z95 * np.asarray(std, dtype=float) / math.sqrt(n)


def _metric_values(trace, metric: str) -> np.ndarray:
    if metric == "cumulative":
        return trace.cumulative
    if metric == "average":
        return trace.average
    if metric == "best":
        return np.array([r.best_observed for r in trace.records])
    raise ValueError(f"metric must be one of {METRICS}")


def aggregate(traces, metric: str = "cumulative") -> dict:
    """Per-algorithm mean curve, sample std (ddof=1) and 95% half-widths.

    Failed traces are skipped. Algorithms with no successful trace are left
    out; with a single trace the spread is NaN.
    """
    groups: dict = {}
    for tr in traces:
        groups.setdefault(tr.algorithm, []).append(tr)
    out = {}
    for alg, trs in groups.items():
        ok = [t for t in trs if not t.failed and len(t)]
        if not ok:
            continue
        length = min(len(t) for t in ok)
        vals = np.array([_metric_values(t, metric)[:length] for t in ok])
        n = vals.shape[0]
        mean = vals.mean(axis=0)
        if n >= 2:
            std = vals.std(axis=0, ddof=1)
            half = ci_half_width(std, n)
        else:
            std = np.full(length, math.nan)
            half = np.full(length, math.nan)
        out[alg] = Aggregate(alg, metric, np.arange(1, length + 1), mean, std, half, n)
    return out


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


def write_raw(traces, path) -> None:
    rows = (row for tr in traces for row in tr.rows())
    _write_csv(Path(path), RAW_HEADER, rows)


def read_raw(path):
    """Rebuild minimal traces (records only) from a raw CSV."""
    from ..trace import RegretTrace, RoundRecord

    traces: dict = {}
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != RAW_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for f in rd:
            key = (f[0], int(f[1]))
            tr = traces.setdefault(key, RegretTrace(f[0], int(f[1])))
            num = [float(x) if x else math.nan for x in f[4:8]]
            tr.records.append(RoundRecord(int(f[2]), int(f[3]), num[0], num[1], num[2], num[3],
                                          math.nan, math.nan))
    return list(traces.values())


def write_aggregate(aggs_cum: dict, aggs_avg: dict, path) -> None:
    header = ["algorithm", "t", "n", "cumulative_mean", "cumulative_std", "cumulative_half_width",
              "average_mean", "average_std", "average_half_width"]
    rows = []
    for alg, c in aggs_cum.items():
        a = aggs_avg[alg]
        for k in range(len(c.t)):
            rows.append([alg, int(c.t[k]), c.n, c.mean[k], c.std[k], c.half_width[k],
                         a.mean[k], a.std[k], a.half_width[k]])
    _write_csv(Path(path), header, rows)


def write_plot_data(aggs: dict, path) -> None:
    """Wide table: ``t`` then ``<alg>_mean, <alg>_lower, <alg>_upper`` per algorithm."""
    algs = list(aggs)
    header = ["t"] + [f"{a}_{s}" for a in algs for s in ("mean", "lower", "upper")]
    length = min((len(v.t) for v in aggs.values()), default=0)
    rows = []
    for k in range(length):
        row = [k + 1]
        for a in algs:
            g = aggs[a]
            row += [g.mean[k], g.lower[k], g.upper[k]]
        rows.append(row)
    _write_csv(Path(path), header, rows)


def build_manifest(result) -> dict:
    cfg = result.config
    return {
        "name": cfg.name,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "profile": cfg.profile,
        "resolution": cfg.effective_resolution,
        "replications": cfg.replications,
        "algorithms": [a.name for a in cfg.algorithms],
        "software": {
            "deltabo": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "backend": _accel.BACKEND,
        },
        "streams": "SeedSequence(seed, spawn_key=(replication, purpose)); purposes: "
                   "0 world, 1 source, 2 init, 3 noise, 100+k algorithm k",
        "source_indices": {r.replication: r.source_indices for r in result.replications},
        "init_indices": {r.replication: r.init_indices for r in result.replications},
        "failures": [{"algorithm": a, "replication": r, "error": e}
                     for a, r, e in result.failures()],
        "outputs": {
            tr.algorithm + f"/{tr.replication}": {"x_hat_index": tr.x_hat_index,
                                                  "x_last_index": tr.x_last_index}
            for tr in result.traces if not tr.failed
        },
    }


def emit_outputs(result, directory) -> dict:
    """Write raw/aggregate/plot CSVs and the manifest; return their paths."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"could not create output directory {out}: {exc}") from exc
    traces = result.traces
    paths = {
        "raw": out / "raw.csv",
        "aggregate": out / "aggregate.csv",
        "plot_cumulative": out / "plot_cumulative.csv",
        "plot_average": out / "plot_average.csv",
        "manifest": out / "manifest.json",
    }
    write_raw(traces, paths["raw"])
    cum = aggregate(traces, "cumulative")
    avg = aggregate(traces, "average")
    write_aggregate(cum, avg, paths["aggregate"])
    write_plot_data(cum, paths["plot_cumulative"])
    write_plot_data(avg, paths["plot_average"])
    if any(math.isnan(r.regret) for tr in traces for r in tr.records):
        paths["plot_best"] = out / "plot_best.csv"
        write_plot_data(aggregate(traces, "best"), paths["plot_best"])
    try:
        paths["manifest"].write_text(json.dumps(build_manifest(result), indent=1, sort_keys=True))
    except OSError as exc:
        raise OSError(f"could not write {paths['manifest']}: {exc}") from exc
    return paths
