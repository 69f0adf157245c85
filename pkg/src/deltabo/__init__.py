"""Transfer Bayesian optimization on finite domains.

DeltaBO models the target as a frozen source posterior plus a GP on the
difference function, and is benchmarked against classical GP acquisition
rules and two transfer stand-ins.
"""

__version__ = "0.1.0"

from .kernels import KernelSpec, SumKernel, build_kernel_matrix, eval_kernel  # noqa: E402
from .gp import Dataset, Posterior, fit_posterior, sample_prior_function  # noqa: E402
from .testbed import FiniteDomain, ObjectivePair  # noqa: E402
from .transfer import (  # noqa: E402
    BetaSchedule,
    DeltaBO,
    SourceModel,
    beta_t,
    build_source_model,
    run_deltabo,
)

__all__ = [
    "BetaSchedule",
    "Dataset",
    "DeltaBO",
    "FiniteDomain",
    "KernelSpec",
    "ObjectivePair",
    "Posterior",
    "SourceModel",
    "SumKernel",
    "beta_t",
    "build_kernel_matrix",
    "build_source_model",
    "eval_kernel",
    "fit_posterior",
    "run_deltabo",
    "sample_prior_function",
]
