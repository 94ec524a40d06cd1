"""Dip-test statistics, p-values, gradients and Dip-based clustering."""

__version__ = "0.1.0"

from ._validation import (
    DegenerateProjectionError,
    DipkitError,
    FitError,
    InvalidInputError,
    NoGradientError,
    OutOfRangeError,
)
from .calibration import (
    FitReport,
    bootstrap_table,
    fit_b,
    fit_theta_per_n,
    freeze_shape,
    holdout_mse,
    refit,
)
from .dip import DipResult, compute_dip, project_and_sort
from .dipnsub import DipNSub, SgdConfig, SubspaceResult, dipnsub, weighted_pvalue_cost
from .evalkit import SCENARIOS, BenchReport, DistributionSpec, bench_pvalue_methods, generate, make_synth, nmi
from .gradient import GradientResult, dip_gradient, pvalue_gradient
from .pvalue import (
    BCoefficients,
    LookupTable,
    PValueConfig,
    SigmoidShape,
    dip_pvalue,
    load_table,
    pvalue_bootstrap,
    pvalue_function,
    pvalue_table,
)
from .unidip import ClusterLabels, SignificanceConfig, TailoredDip, UniDip, assign_noise, mirror, tailored_dip, unidip

__all__ = [
    "BCoefficients",
    "BenchReport",
    "ClusterLabels",
    "DegenerateProjectionError",
    "DipNSub",
    "DipResult",
    "DipkitError",
    "DistributionSpec",
    "FitError",
    "FitReport",
    "GradientResult",
    "InvalidInputError",
    "LookupTable",
    "NoGradientError",
    "OutOfRangeError",
    "PValueConfig",
    "SCENARIOS",
    "SgdConfig",
    "SigmoidShape",
    "SignificanceConfig",
    "SubspaceResult",
    "TailoredDip",
    "UniDip",
    "assign_noise",
    "bench_pvalue_methods",
    "bootstrap_table",
    "compute_dip",
    "dip_gradient",
    "dip_pvalue",
    "dipnsub",
    "fit_b",
    "fit_theta_per_n",
    "freeze_shape",
    "generate",
    "holdout_mse",
    "load_table",
    "make_synth",
    "mirror",
    "nmi",
    "project_and_sort",
    "pvalue_bootstrap",
    "pvalue_function",
    "pvalue_gradient",
    "pvalue_table",
    "refit",
    "tailored_dip",
    "unidip",
    "weighted_pvalue_cost",
]
