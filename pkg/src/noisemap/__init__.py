"""Learned noise models for magnetic particle imaging reconstruction.

The package provides forward-operator handling, a phantom and measurement
pipeline, classical baselines (Tikhonov, regularized and whitened Kaczmarz),
a normalizing flow for measurement-noise densities, and reconstruction with
the flow as a learned data discrepancy.
"""
from .config import RunConfig
from .errors import ConfigError, DataError, DescentError, ManifestError, NumericalError, TrainingError
from .estimators import (
    KaczmarzReconstructor,
    LearnedDiscrepancyReconstructor,
    NoiseFlowDensity,
    TikhonovReconstructor,
    WhitenedKaczmarzReconstructor,
)
from .flow import FlowModel, TrainConfig, load_flow, save_flow, train
from .lda import LdaConfig, lda_gradient, lda_objective, lda_reconstruct
from .metrics import MetricConfig, evaluate_set, grid_search, psnr, ssim
from .operators import ForwardOperator, RawOperator, RealizedSystem, realize, realize_data, select_frequencies
from .solvers import SolverConfig, kaczmarz_regularized, tikhonov_solve, whitening_matrix, wrk_solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DescentError", "FlowModel", "ForwardOperator", "KaczmarzReconstructor",
    "LdaConfig", "LearnedDiscrepancyReconstructor", "ManifestError", "MetricConfig", "NoiseFlowDensity",
    "NumericalError", "RawOperator", "RealizedSystem", "RunConfig", "SolverConfig", "TikhonovReconstructor",
    "TrainConfig", "TrainingError", "WhitenedKaczmarzReconstructor", "evaluate_set", "grid_search",
    "kaczmarz_regularized", "lda_gradient", "lda_objective", "lda_reconstruct", "load_flow", "psnr",
    "realize", "realize_data", "save_flow", "select_frequencies", "ssim", "tikhonov_solve", "train",
    "whitening_matrix", "wrk_solve",
]
