"""Deterministic mini-batch training: MSE loss, Adam, RMSE/MAE metrics, the
training loop, batched evaluation, and the experiment grid runner.
"""

from __future__ import annotations

import time
import traceback
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .data import (
    MultiSeries,
    NormStats,
    WindowSample,
    chronological_split,
    compute_norm_stats,
    normalize,
    shuffle_windows,
    sliding_windows,
    stack_samples,
)
from .errors import ConfigurationError
from .model import ForecastModel, ModelSpec, build
from .params import ParamStore
from .reports import ExperimentReport
from .tensor import Tensor, mean_all, mul, sub
from .utils import seeded_rng, single_thread_blas

Array = np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 0.001
    epochs: int = 50
    seed: int = 1111
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared differences, as a differentiable scalar."""
    if not isinstance(target, Tensor):
        target = Tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    diff = sub(pred, target)
    return mean_all(mul(diff, diff))


def rmse(preds: Array, truths: Array) -> float:
    """Root of the mean squared elementwise difference over all entries."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"rmse: shape mismatch {preds.shape} vs {truths.shape}")
    if preds.size == 0:
        raise ValueError("rmse: empty input")
    return float(np.sqrt(np.mean((preds - truths) ** 2)))


def mae(preds: Array, truths: Array) -> float:
    """Mean absolute elementwise difference over all entries."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ValueError(f"mae: shape mismatch {preds.shape} vs {truths.shape}")
    if preds.size == 0:
        raise ValueError("mae: empty input")
    return float(np.mean(np.abs(preds - truths)))


def adam_step(params: ParamStore, grads, config: TrainConfig, t: int) -> None:
    """Bias-corrected adaptive-moment update, in place.

    grads maps parameter name to gradient array; None reads each parameter's
    accumulated .grad slot.
    """
    if t < 1:
        raise ValueError(f"adam_step counter must be >= 1, got {t}")
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    for name, p in params.items():
        g = grads[name] if grads is not None else p.grad
        m = params.moment1[name]
        v = params.moment2[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        p.data -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps_adam)


def train(model: ForecastModel, train_samples: list[WindowSample], config: TrainConfig,
          eval_samples: list[WindowSample] | None = None,
          report: ExperimentReport | None = None) -> ExperimentReport:
    """Run the full training loop and fill in an ExperimentReport.

    Per epoch: permute the samples with an epoch-derived seed, walk batches of
    batch_size (last may be short), forward with the training flag on, average
    MSE over the batch, backprop, Adam step. Loss history records the mean
    batch loss per epoch.
    """
    if not train_samples:
        raise ConfigurationError("train: no training samples")
    spec = model.spec
    inputs, targets = stack_samples(train_samples)
    if inputs.shape[1:] != (spec.channels, spec.T) or targets.shape[1] != spec.tau:
        raise ConfigurationError(
            f"train: samples of shape {inputs.shape[1:]}/{targets.shape[1:]} do not match "
            f"spec (channels={spec.channels}, T={spec.T}, tau={spec.tau})"
        )
    if report is None:
        report = ExperimentReport(
            run_id=default_run_id(spec, config),
            model_spec=asdict(spec),
            train_config=asdict(config),
        )
    step = 0
    with single_thread_blas():
        for epoch in range(config.epochs):
            started = time.perf_counter()
            order = seeded_rng(config.seed, "epoch_order", epoch).permutation(len(train_samples))
            dropout_rng = seeded_rng(config.seed, "dropout", epoch)
            epoch_losses = []
            for lo in range(0, len(order), config.batch_size):
                batch_idx = order[lo : lo + config.batch_size]
                batch_in = Tensor(inputs[batch_idx])
                loss = mse_loss(
                    model.forward(batch_in, training=True, rng=dropout_rng),
                    Tensor(targets[batch_idx]),
                )
                model.params.zero_grad()
                loss.backward()
                step += 1
                adam_step(model.params, None, config, step)
                epoch_losses.append(loss.data.item())
            report.train_loss.append(float(np.mean(epoch_losses)))
            report.epoch_seconds.append(time.perf_counter() - started)

    train_preds = predict_batched(model, inputs)
    report.train_rmse = rmse(train_preds, targets)
    report.train_mae = mae(train_preds, targets)
    if eval_samples:
        eval_in, eval_tg = stack_samples(eval_samples)
        eval_preds = predict_batched(model, eval_in)
        report.test_rmse = rmse(eval_preds, eval_tg)
        report.test_mae = mae(eval_preds, eval_tg)
    return report


def predict_batched(model: ForecastModel, inputs: Array, batch_size: int = 256) -> Array:
    """Evaluation-mode forecasts for stacked windows [M, C, T] -> [M, tau]."""
    with single_thread_blas():
        chunks = [
            model.forward(Tensor(inputs[lo : lo + batch_size]), training=False).data
            for lo in range(0, len(inputs), batch_size)
        ]
    return np.concatenate(chunks, axis=0)


def default_run_id(spec: ModelSpec, config: TrainConfig) -> str:
    return (
        f"{spec.variant}_T{spec.T}_tau{spec.tau}_k{spec.k}_N{spec.N}_H{spec.H}"
        f"_seed{config.seed}"
    )


@dataclass
class PreparedData:
    """Windowed, normalized train/test samples for one (T, tau) geometry."""

    train_samples: list[WindowSample]
    test_samples: list[WindowSample]
    stats: NormStats
    meta: dict


def prepare_dataset(series: MultiSeries, T: int, tau: int, shuffle_seed: int,
                    split_ratio: tuple[int, int] = (4, 1)) -> PreparedData:
    """Chronological split, train-fitted z-score, windowing, train-only shuffle."""
    train_series, test_series = chronological_split(series, split_ratio, min_len=T + tau)
    stats = compute_norm_stats(train_series)
    train_norm = normalize(train_series, stats)
    test_norm = normalize(test_series, stats)
    train_samples = shuffle_windows(sliding_windows(train_norm, T, tau), shuffle_seed)
    test_samples = sliding_windows(test_norm, T, tau)
    meta = {
        "length": series.length,
        "channels": series.n_channels,
        "train_steps": train_series.length,
        "test_steps": test_series.length,
        "train_windows": len(train_samples),
        "test_windows": len(test_samples),
        "target": series.names[series.target_index],
    }
    return PreparedData(train_samples, test_samples, stats, meta)


def run_cell(spec: ModelSpec, config: TrainConfig, series: MultiSeries,
             dump_attention: bool = False) -> ExperimentReport:
    """Train and evaluate one grid cell end to end."""
    prepared = prepare_dataset(series, spec.T, spec.tau, config.seed)
    model = build(spec)
    report = ExperimentReport(
        run_id=default_run_id(spec, config),
        model_spec=asdict(spec),
        train_config=asdict(config),
        data_meta=prepared.meta,
    )
    train(model, prepared.train_samples, config, prepared.test_samples, report)
    target_std = float(prepared.stats.std[series.target_index])
    if report.test_rmse is not None:
        # z-score is linear, so unit-space errors are the normalized ones
        # scaled by the target channel's training std
        report.test_rmse_denorm = report.test_rmse * target_std
        report.test_mae_denorm = report.test_mae * target_std
    if dump_attention and prepared.test_samples:
        window = prepared.test_samples[0].input
        report.attention = {
            key: value.tolist() for key, value in model.attention_weights(window).items()
        }
    return report


def _cell_task(args) -> ExperimentReport:
    spec, config, series, dump_attention = args
    try:
        return run_cell(spec, config, series, dump_attention)
    except Exception as exc:  # recorded, not raised: cells are independent
        return ExperimentReport(
            run_id=default_run_id(spec, config),
            model_spec=asdict(spec),
            train_config=asdict(config),
            error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}",
        )


def run_experiment(grid: list[tuple[ModelSpec, TrainConfig]], series: MultiSeries,
                   jobs: int = 1, dump_attention: bool = False) -> list[ExperimentReport]:
    """One report per grid cell; a failing cell records its error and the
    rest of the grid still runs. jobs > 1 runs cells in worker processes
    (each cell is deterministic on its own, so aggregation order is fixed)."""
    if not grid:
        raise ConfigurationError("run_experiment: empty grid")
    tasks = [(spec, config, series, dump_attention) for spec, config in grid]
    if jobs <= 1 or len(grid) == 1:
        return [_cell_task(t) for t in tasks]
    try:
        with ProcessPoolExecutor(max_workers=min(jobs, len(grid))) as pool:
            return list(pool.map(_cell_task, tasks))
    except Exception:  # pool machinery unavailable; cells themselves never raise
        with ThreadPoolExecutor(max_workers=min(jobs, len(grid))) as pool:
            return list(pool.map(_cell_task, tasks))
