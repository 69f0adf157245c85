"""Command line entry point: ``deltabo run|aggregate|gamma|pairgen``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from ..info_gain import exact_gamma, greedy_gamma, prop1_bound
from ..testbed import write_pair_file
from .config import ConfigError, load_config, with_overrides
from .outputs import (aggregate, read_raw, write_aggregate, write_plot_data,
                      emit_outputs)
from .runner import ExperimentAborted, build_domain, build_objective, default_output_dir, run_experiment

log = logging.getLogger("deltabo")


def _load(args):
    cfg = load_config(args.config)
    return with_overrides(cfg, seed=args.seed, profile=args.profile, workers=args.workers)


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else default_output_dir(cfg)


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        result = run_experiment(cfg, out_dir=out, workers=cfg.workers,
                                resume=not args.fresh)
    except ExperimentAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    paths = emit_outputs(result, out)
    for note in _excluded(result):
        print(note, file=sys.stderr)
    cum = aggregate(result.traces, "cumulative")
    print(f"{'algorithm':<16}{'n':>4}{'R_T mean':>12}{'+/-':>10}")
    for alg, a in cum.items():
        print(f"{alg:<16}{a.n:>4}{a.mean[-1]:>12.4f}{a.half_width[-1]:>10.4f}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _excluded(result):
    ok = {t.algorithm for t in result.traces if not t.failed}
    for a in result.config.algorithms:
        if a.name not in ok:
            yield f"note: {a.name} excluded from aggregates (every replication failed)"


def cmd_aggregate(args) -> int:
    d = Path(args.dir)
    traces = read_raw(d / "raw.csv")
    cum = aggregate(traces, "cumulative")
    avg = aggregate(traces, "average")
    write_aggregate(cum, avg, d / "aggregate.csv")
    write_plot_data(cum, d / "plot_cumulative.csv")
    write_plot_data(avg, d / "plot_average.csv")
    for alg, a in cum.items():
        print(f"{alg:<16}{a.n:>4}{a.mean[-1]:>12.4f}{a.half_width[-1]:>10.4f}")
    return 0


def cmd_gamma(args) -> int:
    cfg = _load(args)
    domain = build_domain(cfg)
    kg = cfg.objective["kernel_g"]
    kd = cfg.objective["kernel_delta"]
    rows = [("delta", kd), ("source", kg), ("target", kg + kd)]
    horizons = args.T or [cfg.horizon]
    print(f"{'kernel':<8}{'family':<16}{'tau2':>7}{'T':>5}{'greedy':>11}{'exact':>11}{'shape':>11}")
    for label, k in rows:
        parts = getattr(k, "parts", (k,))
        fam = "+".join(p.family for p in parts)
        tau2 = sum(p.tau2 for p in parts)
        for T in horizons:
            g = greedy_gamma(k, cfg.sigma2, domain, T).value
            try:
                e = f"{exact_gamma(k, cfg.sigma2, domain, T).value:11.4f}"
            except ValueError:
                e = f"{'-':>11}"
            shape = prop1_bound(parts[0].family, tau2, T, domain.dim) if len(parts) == 1 else math.nan
            print(f"{label:<8}{fam:<16}{tau2:>7.3g}{T:>5}{g:>11.4f}{e}{shape:>11.4f}")
    return 0


def cmd_pairgen(args) -> int:
    cfg = _load(args)
    pair = build_objective(cfg, args.replication)
    if not hasattr(pair, "f"):
        raise ConfigError("pairgen needs an objective with known values, not a plug-in")
    out = Path(args.out) if args.out else default_output_dir(cfg) / f"pair_rep{args.replication}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pair_file(pair, out)
    print(f"wrote {out} ({len(pair.domain)} points, f* = {pair.f_star!r})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltabo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="experiment config file")
        sp.add_argument("--seed", type=int, help="override experiment.seed")
        sp.add_argument("--profile", choices=("ci", "release"))
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output path (else $DELTABO_OUTPUT_DIR or experiment.output_dir)")

    sp = sub.add_parser("run", help="run an experiment and write CSVs")
    common(sp)
    sp.add_argument("--fresh", action="store_true", help="ignore stored replications")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("aggregate", help="recompute aggregate and plot files from raw.csv")
    sp.add_argument("dir")
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("gamma", help="information gain report for the objective kernels")
    common(sp)
    sp.add_argument("-T", type=int, action="append", help="horizon (repeatable)")
    sp.set_defaults(func=cmd_gamma)

    sp = sub.add_parser("pairgen", help="write the objective pair to a CSV file")
    common(sp)
    sp.add_argument("--replication", type=int, default=0)
    sp.set_defaults(func=cmd_pairgen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
