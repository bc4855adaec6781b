"""Generalized canonical correlation analysis for blind source extraction from noisy mixtures."""

from .adaptive_direct import DirectExtractorState, direct_cost, direct_gradient, init_direct, run_direct, step_direct
from .dual_lp import DualLPState, dual_cost, dual_gradient, init_dual, run_dual, step_dual
from .estimators import GCCA, DirectGCCAExtractor, DualLPExtractor
from .exceptions import ConfigError, GCCAError, PreconditionError
from .harness import ExperimentConfig, load_config, load_preset, run_experiment
from .metrics import GlobalVector, global_vector, match_source, performance_index
from .pencil import PencilSolution, deflate, extract_batch, extract_sequential, solve_pencil
from .signals import (
    REFERENCE_MIXING_MATRIX,
    MixtureModel,
    SignalMatrix,
    SourceFilter,
    SourceSpec,
    generate_sources,
    mix,
    row_normalize,
)
from .stats import (
    REFERENCE_PREDICTOR_B,
    LagCorrelation,
    PredictorCoeffs,
    estimate_lag_correlation,
    normalized_autocorrelations,
)

__version__ = "0.1.0"

__all__ = [
    "DirectExtractorState",
    "direct_cost",
    "direct_gradient",
    "init_direct",
    "run_direct",
    "step_direct",
    "DualLPState",
    "dual_cost",
    "dual_gradient",
    "init_dual",
    "run_dual",
    "step_dual",
    "GCCA",
    "DirectGCCAExtractor",
    "DualLPExtractor",
    "ConfigError",
    "GCCAError",
    "PreconditionError",
    "ExperimentConfig",
    "load_config",
    "load_preset",
    "run_experiment",
    "GlobalVector",
    "global_vector",
    "match_source",
    "performance_index",
    "PencilSolution",
    "deflate",
    "extract_batch",
    "extract_sequential",
    "solve_pencil",
    "REFERENCE_MIXING_MATRIX",
    "MixtureModel",
    "SignalMatrix",
    "SourceFilter",
    "SourceSpec",
    "generate_sources",
    "mix",
    "row_normalize",
    "REFERENCE_PREDICTOR_B",
    "LagCorrelation",
    "PredictorCoeffs",
    "estimate_lag_correlation",
    "normalized_autocorrelations",
]
