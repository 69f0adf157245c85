"""Config parsing, seeded replications and output files for regret experiments."""
from .config import ALGORITHMS, ConfigError, ExperimentConfig, load_config, parse_config, with_overrides
from .outputs import aggregate, ci_half_width, emit_outputs
from .runner import ExperimentAborted, ExperimentResult, run_experiment, run_replication

__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "ExperimentAborted",
    "ExperimentConfig",
    "ExperimentResult",
    "aggregate",
    "ci_half_width",
    "emit_outputs",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_replication",
    "with_overrides",
]
