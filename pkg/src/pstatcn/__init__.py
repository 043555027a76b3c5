"""Parallel spatio-temporal attention TCN forecasting library.

A self-contained multivariate time-series forecaster: dilated causal
convolution backbones opened by parallel spatial/temporal attention blocks,
trained with a from-scratch reverse-mode autodiff core, all in float64 with
fully deterministic seeding.
"""

from .attention import SpatialAttention, TemporalAttention
from .data import (
    MultiSeries,
    NormStats,
    WindowSample,
    chronological_split,
    compute_norm_stats,
    denormalize,
    load_csv,
    normalize,
    save_csv,
    shuffle_windows,
    sliding_windows,
    synth_squat,
)
from .errors import ConfigurationError, IngestionError
from .layers import Backbone, CausalConv1d, Dense, ResidualBlock, causal_dilated_conv, softmax
from .model import (
    ForecastModel,
    ModelSpec,
    VARIANTS,
    build,
    load_checkpoint,
    save_checkpoint,
)
from .params import ParamStore
from .reports import ExperimentReport
from .tensor import Tensor, finite_diff_grad
from .training import (
    TrainConfig,
    adam_step,
    mae,
    mse_loss,
    prepare_dataset,
    rmse,
    run_cell,
    run_experiment,
    train,
)
from .utils import seeded_rng

__all__ = [
    "Backbone",
    "CausalConv1d",
    "ConfigurationError",
    "Dense",
    "ExperimentReport",
    "ForecastModel",
    "IngestionError",
    "ModelSpec",
    "MultiSeries",
    "NormStats",
    "ParamStore",
    "ResidualBlock",
    "SpatialAttention",
    "TemporalAttention",
    "Tensor",
    "TrainConfig",
    "VARIANTS",
    "WindowSample",
    "adam_step",
    "build",
    "causal_dilated_conv",
    "chronological_split",
    "compute_norm_stats",
    "denormalize",
    "finite_diff_grad",
    "load_checkpoint",
    "load_csv",
    "mae",
    "mse_loss",
    "normalize",
    "prepare_dataset",
    "rmse",
    "run_cell",
    "run_experiment",
    "save_checkpoint",
    "save_csv",
    "seeded_rng",
    "shuffle_windows",
    "sliding_windows",
    "softmax",
    "synth_squat",
    "train",
]
