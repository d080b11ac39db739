"""Bayesian optimization with a clustered Gaussian process surrogate.

The surrogate partitions the search domain by clustering observed
(input, response) pairs, classifies the domain with nearest neighbors, fits
one Gaussian process per component, and proposes points by expected
improvement weighted against component sample counts.
"""

from .acquisition import AcquisitionConfig, expected_improvement, propose_next
from .engine import (
    CgpModel,
    EngineConfig,
    RunResult,
    StepRecord,
    Tuner,
    fit_cgp,
    optimize,
    predict_cgp,
)
from .errors import ConfigError, DomainError, EvaluationError, NumericError
from .gp import FitConfig, FittedComponent, KernelSpec, fit_component, predict, predict_many
from .harness import (
    BatchConfig,
    compute_stats,
    load_batch_config,
    paired_compare,
    read_trace,
    run_batch,
    write_report,
    write_trace,
)
from .objectives import (
    KnownOptimum,
    Objective,
    external_command,
    load_replay,
    matmul_like,
    replay,
    synthetic,
    synthetic_names,
    with_noise,
)
from .partition import ClassifierModel, ClusteringSpec, classify, classify_many
from .space import DimensionSpec, SearchSpace, box

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "BatchConfig",
    "CgpModel",
    "ClassifierModel",
    "ClusteringSpec",
    "ConfigError",
    "DimensionSpec",
    "DomainError",
    "EngineConfig",
    "EvaluationError",
    "FitConfig",
    "FittedComponent",
    "KernelSpec",
    "KnownOptimum",
    "NumericError",
    "Objective",
    "RunResult",
    "SearchSpace",
    "StepRecord",
    "Tuner",
    "box",
    "classify",
    "classify_many",
    "compute_stats",
    "expected_improvement",
    "external_command",
    "fit_cgp",
    "fit_component",
    "load_batch_config",
    "load_replay",
    "matmul_like",
    "optimize",
    "paired_compare",
    "predict",
    "predict_cgp",
    "predict_many",
    "propose_next",
    "read_trace",
    "replay",
    "run_batch",
    "synthetic",
    "synthetic_names",
    "with_noise",
    "write_report",
    "write_trace",
]
