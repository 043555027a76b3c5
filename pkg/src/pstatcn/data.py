"""Dataset plumbing: CSV ingestion, a synthetic squat-exercise sensor
generator, chronological splitting, train-fitted z-score normalization, and
sliding-window sample construction.

The synthetic generator stands in for a private wearable-sensor corpus: each
simulated sensor emits 3-axis acceleration and 3-axis angular velocity as
phase-shifted periodic bursts with a slowly drifting cadence, plus resultant
(Euclidean-norm) channels derived from the master sensor's axes. The
forecasting target is the resultant acceleration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, IngestionError
from .utils import seeded_rng

Array = np.ndarray

TARGET_CHANNEL = "acc_resultant"


@dataclass
class MultiSeries:
    """Named channels over a shared chronological axis; values is [C, L]."""

    names: list[str]
    values: Array
    target_index: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or len(self.names) != self.values.shape[0]:
            raise ConfigurationError(
                f"{len(self.names)} channel names for value block of shape {self.values.shape}"
            )
        if not 0 <= self.target_index < len(self.names):
            raise ConfigurationError(f"target_index {self.target_index} out of range")

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def target(self) -> Array:
        return self.values[self.target_index]


@dataclass
class WindowSample:
    """One supervised example: T steps of every channel, tau target steps."""

    input: Array
    target: Array
    origin: int


@dataclass
class NormStats:
    """Per-channel mean/std fitted on the training split only."""

    mean: Array
    std: Array

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)


def load_csv(path, target_column: str = "target") -> MultiSeries:
    """Parse a header + float-rows CSV into channels (one channel per column)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise IngestionError(f"{path}: empty file")
    names = [c.strip() for c in lines[0].split(",")]
    if target_column not in names:
        raise IngestionError(f"{path}: missing target column {target_column!r} in header")
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(names):
            raise IngestionError(
                f"{path}:{lineno}: expected {len(names)} cells, found {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise IngestionError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=np.float64).T
    return MultiSeries(names=names, values=values, target_index=names.index(target_column))


def save_csv(series: MultiSeries, path) -> None:
    """Write channels back as columns; floats use shortest round-trip repr."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(series.names) + "\n")
        for t in range(series.length):
            fh.write(",".join(repr(float(v)) for v in series.values[:, t]) + "\n")


def synth_squat(n_sensors: int = 4, length: int = 20000, noise_std: float = 0.05,
                seed: int = 1111) -> MultiSeries:
    """Deterministic multi-sensor squat-exercise recording.

    Emits 6 channels per sensor (acc_x/y/z, gyro_x/y/z) plus two resultant
    channels (Euclidean norm of the master sensor's axes, computed before the
    measurement noise is added, so at noise_std=0 each resultant equals the
    norm of its three axis channels exactly). The signal is built to exercise
    both attention mechanisms:

      * the squat cadence (~55 steps per repetition) drifts slowly, so the
        local phase must be read from the window rather than memorized;
      * sensors take turns being informative: each slave sensor's amplitude
        is gated by a slow rotating envelope, so which channels carry signal
        at a given moment is state-dependent;
      * slave channels suffer short glitch transients (a few steps of large
        deviation, scaled with noise_std) that a per-step weighting can
        suppress but a fixed filter cannot; the master sensor is glitch-free
        but noisier, so clean phase information lives in whichever slaves are
        currently gated on.
    """
    if length < 1:
        raise ConfigurationError(f"length must be >= 1, got {length}")
    if n_sensors < 1:
        raise ConfigurationError(f"n_sensors must be >= 1, got {n_sensors}")
    if noise_std < 0:
        raise ConfigurationError(f"noise_std must be >= 0, got {noise_std}")
    rng = seeded_rng(seed, "synth_squat")
    t = np.arange(length, dtype=np.float64)

    base_period = 55.0
    phase = t / base_period
    phase = phase + 0.22 * np.sin(2 * np.pi * t / 1873.0) + 0.13 * np.sin(2 * np.pi * t / 3307.0)

    glitch_scale = 40.0 * noise_std

    def glitched(signal: Array) -> Array:
        # short positive transients (saturation-style artifacts); draws happen
        # regardless of noise level so the clean waveform is identical across
        # noise settings
        count = max(1, length // 350)
        starts = rng.integers(0, length, size=count)
        widths = rng.integers(2, 11, size=count)
        amps = rng.uniform(1.5, 3.5, size=count)
        out = signal.copy()
        for start, width, amp in zip(starts, widths, amps):
            out[start : start + width] += glitch_scale * amp
        return out

    names: list[str] = []
    rows: list[Array] = []
    master_axes: dict[str, Array] = {}
    for sensor in range(n_sensors):
        strength = 1.0 / (1.0 + 0.25 * sensor)
        if sensor == 0:
            gate = np.ones_like(t)  # the master stays informative; the target derives from it
        else:
            gate_phase = t / 800.0 + sensor / max(1, n_sensors - 1)
            gate = 0.08 + 0.92 * np.maximum(0.0, np.sin(2 * np.pi * gate_phase)) ** 2
        for kind, kind_scale in (("acc", 1.0), ("gyro", 0.8)):
            for axis in "xyz":
                amp = strength * kind_scale * rng.uniform(0.8, 1.6)
                lag = rng.uniform(0.0, 1.0)
                h2 = rng.uniform(0.2, 0.55)
                h3 = rng.uniform(0.05, 0.3)
                baseline = rng.uniform(-0.5, 0.5)
                wobble = 0.1 * np.sin(
                    2 * np.pi * t / rng.uniform(900.0, 2600.0) + rng.uniform(0, 2 * np.pi)
                )
                waveform = (
                    np.sin(2 * np.pi * (phase + lag))
                    + h2 * np.sin(4 * np.pi * (phase + lag) + rng.uniform(0, 2 * np.pi))
                    + h3 * np.sin(6 * np.pi * (phase + lag) + rng.uniform(0, 2 * np.pi))
                )
                signal = baseline + wobble + gate * amp * waveform
                if sensor == 0:
                    # the master's acceleration axes stay artifact-free (the
                    # target resultant derives from them); its gyro axes and
                    # every slave channel carry glitches
                    master_axes[f"{kind}_{axis}"] = signal
                if sensor > 0 or kind == "gyro":
                    signal = glitched(signal)
                names.append(f"{kind}{sensor}_{axis}")
                rows.append(signal)

    acc_resultant = np.sqrt(
        master_axes["acc_x"] ** 2 + master_axes["acc_y"] ** 2 + master_axes["acc_z"] ** 2
    )
    gyro_resultant = np.sqrt(
        master_axes["gyro_x"] ** 2 + master_axes["gyro_y"] ** 2 + master_axes["gyro_z"] ** 2
    )
    names.append(TARGET_CHANNEL)
    rows.append(acc_resultant)
    names.append("gyro_resultant")
    rows.append(gyro_resultant)

    values = np.stack(rows)
    if noise_std > 0:
        # the master unit reads noisy; clean phase information lives in the
        # gated slave channels
        per_channel = np.full(len(names), noise_std)
        per_channel[:6] *= 3.0
        values = values + per_channel[:, None] * rng.standard_normal(values.shape)
    return MultiSeries(names=names, values=values, target_index=names.index(TARGET_CHANNEL))


def chronological_split(series: MultiSeries, ratio: tuple[int, int] = (4, 1),
                        min_len: int | None = None) -> tuple[MultiSeries, MultiSeries]:
    """First floor(L * a / (a+b)) steps to train, the rest to test, in order."""
    a, b = ratio
    if a < 1 or b < 1:
        raise ConfigurationError(f"split ratio parts must be positive, got {ratio}")
    cut = (series.length * a) // (a + b)
    train = MultiSeries(series.names, series.values[:, :cut], series.target_index)
    test = MultiSeries(series.names, series.values[:, cut:], series.target_index)
    if min_len is not None and test.length < min_len:
        raise ConfigurationError(
            f"test split has {test.length} steps, needs at least {min_len}"
        )
    return train, test


def compute_norm_stats(series: MultiSeries) -> NormStats:
    mean = series.values.mean(axis=1)
    std = series.values.std(axis=1)
    flat = np.flatnonzero(std == 0.0)
    if flat.size:
        raise ConfigurationError(
            f"constant channel(s) cannot be normalized: {[series.names[i] for i in flat]}"
        )
    return NormStats(mean=mean, std=std)


def normalize(series: MultiSeries, stats: NormStats) -> MultiSeries:
    values = (series.values - stats.mean[:, None]) / stats.std[:, None]
    return MultiSeries(series.names, values, series.target_index)


def denormalize(values: Array, stats: NormStats) -> Array:
    """Inverse of normalize for a full [C, L] block."""
    return values * stats.std[:, None] + stats.mean[:, None]


def sliding_windows(series: MultiSeries, T: int, tau: int, stride: int = 1) -> list[WindowSample]:
    """Samples at origins 0, stride, ...; count = floor((L-T-tau)/stride) + 1."""
    if T < 1 or tau < 1 or stride < 1:
        raise ConfigurationError(f"T, tau, stride must be positive, got {(T, tau, stride)}")
    if series.length < T + tau:
        raise ConfigurationError(
            f"series length {series.length} is shorter than T + tau = {T + tau}"
        )
    samples = []
    target = series.target
    for origin in range(0, series.length - T - tau + 1, stride):
        samples.append(
            WindowSample(
                input=series.values[:, origin : origin + T],
                target=target[origin + T : origin + T + tau],
                origin=origin,
            )
        )
    return samples


def shuffle_windows(samples: list[WindowSample], seed: int) -> list[WindowSample]:
    """Deterministic permutation; the multiset of samples is unchanged."""
    perm = seeded_rng(seed, "shuffle_windows").permutation(len(samples))
    return [samples[i] for i in perm]


def stack_samples(samples: list[WindowSample]) -> tuple[Array, Array]:
    """Contiguous [M, C, T] inputs and [M, tau] targets for batched passes."""
    inputs = np.stack([s.input for s in samples])
    targets = np.stack([s.target for s in samples])
    return inputs, targets
