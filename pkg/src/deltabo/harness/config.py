"""Experiment configuration: a flat ``key = value`` text format with dotted keys.

Grammar (one statement per line)::

    # comment (also allowed after a value)
    section.sub.key = value

Values are parsed as, in order: ``true``/``false`` -> bool, int, float,
comma-separated list (if the value contains a comma), otherwise a bare
string. Keys may appear once. Unknown keys are rejected.

See ``docs/config.md`` for every key and its default.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..kernels import FAMILIES, KernelSpec
from ..transfer import NOISE_MODES, PRIOR_VARIANCE_MODES, BetaSchedule

ALGORITHMS = (
    "deltabo",
    "gp_ucb",
    "gp_ei",
    "gp_pi",
    "gp_ts",
    "env_gp_style",
    "diff_gp_style",
)

OBJECTIVE_KINDS = ("assumption_satisfied", "gaussian", "bohachevsky", "pair_file", "plugin")


class ConfigError(ValueError):
    pass


_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


def _scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_text(text: str) -> dict:
    """Parse config text into a flat ``{dotted_key: value}`` dict."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = m.group(1), m.group(2)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if "," in val:
            out[key] = [_scalar(v.strip()) for v in val.split(",") if v.strip()]
        else:
            out[key] = _scalar(val)
    return out


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

_KERNEL_FIELDS = ("family", "tau2", "lengthscale")
_BETA_FIELDS = ("mode", "value", "rho")

_TOP_KEYS = {
    "name", "tau2",
    "objective.kind", "objective.mu", "objective.shift", "objective.path", "objective.plugin",
    "objective.negate",
    "domain.lower", "domain.upper", "domain.resolution", "domain.dim",
    "experiment.n_source", "experiment.horizon", "experiment.n_init", "experiment.replications",
    "experiment.seed", "experiment.workers", "experiment.output_dir",
    "experiment.failure_abort_fraction", "experiment.factor_cap",
    "noise.source", "noise.target",
    "beta.mode", "beta.value", "beta.rho",
    "profile", "profile.ci_max_resolution",
    "algorithms",
}
_TOP_KEYS |= {f"objective.kernel_g.{f}" for f in _KERNEL_FIELDS}
_TOP_KEYS |= {f"objective.kernel_delta.{f}" for f in _KERNEL_FIELDS}

_ALGO_KERNELS = {
    "deltabo": ("kernel_g", "kernel_delta"),
    "gp_ucb": ("kernel",),
    "gp_ei": ("kernel",),
    "gp_pi": ("kernel",),
    "gp_ts": ("kernel",),
    "env_gp_style": ("kernel",),
    "diff_gp_style": ("kernel",),
}
_ALGO_EXTRA = {
    "deltabo": ("delta_noise_mode", "delta_prior_variance"),
    "gp_ei": ("xi",),
    "gp_pi": ("xi",),
    "env_gp_style": ("env_noise_inflation",),
}


def _allowed_algo_key(key: str) -> bool:
    parts = key.split(".")
    if len(parts) < 3 or parts[0] != "algorithms" or parts[1] not in ALGORITHMS:
        return False
    name, rest = parts[1], parts[2:]
    if len(rest) == 2 and rest[0] in _ALGO_KERNELS[name] and rest[1] in _KERNEL_FIELDS:
        return True
    if len(rest) == 2 and rest[0] == "beta" and rest[1] in _BETA_FIELDS:
        return True
    if len(rest) == 1 and rest[0] in _ALGO_EXTRA.get(name, ()) + ("noise",):
        return True
    return False


@dataclass(frozen=True)
class AlgorithmConfig:
    name: str
    kernels: dict
    beta: BetaSchedule
    noise: float
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    objective_kind: str
    objective: dict
    domain_lower: float | None
    domain_upper: float | None
    resolution: int | None
    dim: int
    n_source: int
    horizon: int
    n_init: int
    replications: int
    seed: int
    workers: int
    output_dir: str
    sigma0_sq: float
    sigma2: float
    tau2: float
    beta: BetaSchedule
    algorithms: tuple
    profile: str = "ci"
    ci_max_resolution: int = 60
    failure_abort_fraction: float = 0.2
    factor_cap: int = 20_000
    source_text: str = ""

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    @property
    def effective_resolution(self) -> int:
        res = self.resolution or DEFAULT_RESOLUTION.get(self.objective_kind, 60)
        if self.profile == "ci":
            return min(res, self.ci_max_resolution)
        return res

    def algorithm(self, name: str) -> AlgorithmConfig:
        for a in self.algorithms:
            if a.name == name:
                return a
        raise KeyError(name)


def _kernel(raw: dict, prefix: str, default: KernelSpec) -> KernelSpec:
    fam = raw.get(f"{prefix}.family", default.family)
    if fam not in FAMILIES:
        raise ConfigError(f"{prefix}.family: unknown family {fam!r}")
    try:
        return KernelSpec(str(fam), float(raw.get(f"{prefix}.tau2", default.tau2)),
                          float(raw.get(f"{prefix}.lengthscale", default.lengthscale)))
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def _beta(raw: dict, prefix: str, default: BetaSchedule) -> BetaSchedule:
    try:
        return BetaSchedule(str(raw.get(f"{prefix}.mode", default.mode)),
                            float(raw.get(f"{prefix}.value", default.value)),
                            float(raw.get(f"{prefix}.rho", default.rho)))
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def _positive(name, v, allow_zero=False):
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    if v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {v}")
    return v


def _int(name, v, minimum):
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {v!r}")
    return v


DEFAULT_TARGET_KERNEL = KernelSpec("matern52", 1.0, 1.0)
DEFAULT_RESOLUTION = {"assumption_satisfied": 120, "gaussian": 100, "bohachevsky": 120}


def _opt_float(raw: dict, key: str):
    if key not in raw:
        return None
    v = raw[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def from_dict(raw: dict, source_text: str = "") -> ExperimentConfig:
    """Validate a flat key dict and build an :class:`ExperimentConfig`."""
    unknown = [k for k in raw if k not in _TOP_KEYS and not _allowed_algo_key(k)]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    kind = raw.get("objective.kind", "assumption_satisfied")
    if kind not in OBJECTIVE_KINDS:
        raise ConfigError(f"objective.kind must be one of {OBJECTIVE_KINDS}, got {kind!r}")
    objective = {
        "mu": float(raw.get("objective.mu", 0.0)),
        "shift": float(raw.get("objective.shift", 1.0)),
        "path": raw.get("objective.path"),
        "plugin": raw.get("objective.plugin"),
        "negate": bool(raw.get("objective.negate", kind == "bohachevsky")),
        "kernel_g": _kernel(raw, "objective.kernel_g", KernelSpec("matern52", 1.0, 1.2)),
        "kernel_delta": _kernel(raw, "objective.kernel_delta", KernelSpec("se", 0.8, 1.0)),
    }
    if kind == "pair_file" and not objective["path"]:
        raise ConfigError("objective.kind = pair_file requires objective.path")
    if kind == "plugin" and not objective["plugin"]:
        raise ConfigError("objective.kind = plugin requires objective.plugin = module:factory")

    names = raw.get("algorithms", list(ALGORITHMS))
    if isinstance(names, str):
        names = [names]
    for n in names:
        if n not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {n!r}; registered: {', '.join(ALGORITHMS)}")
    if len(set(names)) != len(names):
        raise ConfigError("algorithms list has duplicates")
    configured = {k.split(".")[1] for k in raw if k.startswith("algorithms.")}
    stray = configured - set(names)
    if stray:
        raise ConfigError(f"settings given for algorithms not in the list: {sorted(stray)}")

    sigma2 = float(_positive("noise.target", raw.get("noise.target", 0.01)))
    sigma0 = float(_positive("noise.source", raw.get("noise.source", 0.1)))
    tau2 = float(_positive("tau2", raw.get("tau2", 0.8)))
    beta = _beta(raw, "beta", BetaSchedule("constant", 0.2, 0.1))

    algos = []
    for n in names:
        p = f"algorithms.{n}"
        kernels = {}
        for slot in _ALGO_KERNELS[n]:
            default = DEFAULT_TARGET_KERNEL
            if n == "deltabo":
                default = objective[slot]
            kernels[slot] = _kernel(raw, f"{p}.{slot}", default)
        opts = {}
        if n == "deltabo":
            opts["delta_noise_mode"] = raw.get(f"{p}.delta_noise_mode", "per_observation")
            opts["delta_prior_variance"] = raw.get(f"{p}.delta_prior_variance", "paper")
            if opts["delta_noise_mode"] not in NOISE_MODES:
                raise ConfigError(f"{p}.delta_noise_mode must be one of {NOISE_MODES}")
            if opts["delta_prior_variance"] not in PRIOR_VARIANCE_MODES:
                raise ConfigError(f"{p}.delta_prior_variance must be one of {PRIOR_VARIANCE_MODES}")
        if n in ("gp_ei", "gp_pi"):
            opts["xi"] = float(_positive(f"{p}.xi", raw.get(f"{p}.xi", 0.01), allow_zero=True))
        if n == "env_gp_style":
            opts["env_noise_inflation"] = float(
                _positive(f"{p}.env_noise_inflation", raw.get(f"{p}.env_noise_inflation", tau2),
                          allow_zero=True))
        noise = float(_positive(f"{p}.noise", raw.get(f"{p}.noise", sigma2)))
        algos.append(AlgorithmConfig(n, kernels, _beta(raw, f"{p}.beta", beta), noise, opts))

    n_init = _int("experiment.n_init", raw.get("experiment.n_init", 1), 0)
    if n_init == 0 and any(a in names for a in ("gp_ei", "gp_pi")):
        raise ConfigError("gp_ei and gp_pi need experiment.n_init >= 1 to define the incumbent")

    profile = raw.get("profile", "ci")
    if profile not in ("ci", "release"):
        raise ConfigError("profile must be ci or release")

    abort = float(raw.get("experiment.failure_abort_fraction", 0.2))
    if not 0 < abort <= 1:
        raise ConfigError("experiment.failure_abort_fraction must be in (0, 1]")

    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        objective_kind=kind,
        objective=objective,
        domain_lower=_opt_float(raw, "domain.lower"),
        domain_upper=_opt_float(raw, "domain.upper"),
        resolution=(_int("domain.resolution", raw["domain.resolution"], 1)
                    if "domain.resolution" in raw else None),
        dim=_int("domain.dim", raw.get("domain.dim", 2), 1),
        n_source=_int("experiment.n_source", raw.get("experiment.n_source", 100), 1),
        horizon=_int("experiment.horizon", raw.get("experiment.horizon", 20), 1),
        n_init=n_init,
        replications=_int("experiment.replications", raw.get("experiment.replications", 30), 1),
        seed=_int("experiment.seed", raw.get("experiment.seed", 0), 0),
        workers=_int("experiment.workers", raw.get("experiment.workers", 1), 1),
        output_dir=str(raw.get("experiment.output_dir", "results")),
        sigma0_sq=sigma0,
        sigma2=sigma2,
        tau2=tau2,
        beta=beta,
        algorithms=tuple(algos),
        profile=profile,
        ci_max_resolution=_int("profile.ci_max_resolution", raw.get("profile.ci_max_resolution", 60), 1),
        failure_abort_fraction=abort,
        factor_cap=_int("experiment.factor_cap", raw.get("experiment.factor_cap", 20_000), 1),
        source_text=source_text,
    )


def parse_config(text: str) -> ExperimentConfig:
    return from_dict(parse_text(text), text)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy with CLI overrides applied (``None`` values are ignored)."""
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw)
