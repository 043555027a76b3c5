"""Full forecaster assembly: attention branches, backbones, dense heads,
variant wiring, and bitwise-exact checkpoints.

The flagship variant runs two parallel branches over the same input window --
one opened by spatial attention, one by temporal attention -- each feeding an
identical stacked backbone whose last time step is mapped by a dense layer to
the tau-step forecast; the branch outputs are summed. Ablation variants swap
either or both attention blocks for the identity, and the plain TCN variant
keeps a single attention-free branch.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .attention import SpatialAttention, TemporalAttention
from .errors import ConfigurationError
from .layers import Backbone, Dense, take_last_step
from .params import ParamStore
from .tensor import Tensor, add, transpose_axes

VARIANTS = ("PSTA_TCN", "P_TCN", "PSA_TCN", "PTA_TCN", "TCN")

_CHECKPOINT_MAGIC = b"PSTATCN-CKPT"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Architecture configuration; n is the exogenous channel count, so the
    model consumes n+1 input rows (exogenous plus target history)."""

    variant: str = "PSTA_TCN"
    n: int = 1
    T: int = 32
    tau: int = 1
    k: int = 7
    N: int = 8
    H: int = 12
    dropout: float = 0.0
    seed: int = 1111

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for field in ("n", "T", "tau", "k", "N", "H"):
            value = getattr(self, field)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigurationError(f"{field} must be a positive integer, got {value!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout!r}")

    @property
    def channels(self) -> int:
        return self.n + 1


class Branch:
    """attention (or identity) -> backbone -> last step -> dense head.

    The first convolution after an attention block initializes with its
    fan-in bound scaled by the softmax width (channels or T): near-uniform
    attention attenuates the window by that factor, and without the
    compensation attention branches start an order of magnitude quieter than
    identity branches and train correspondingly slower.
    """

    def __init__(self, store: ParamStore, label: str, spec: ModelSpec,
                 attention_kind: str | None):
        self.label = label
        input_gain = 1.0
        if attention_kind == "spatial":
            self.attention = SpatialAttention(store, f"{label}.attention", spec.channels)
            input_gain = float(spec.channels)
        elif attention_kind == "temporal":
            self.attention = TemporalAttention(store, f"{label}.attention", spec.T)
            input_gain = float(spec.T)
        elif attention_kind is None:
            self.attention = None
        else:
            raise ConfigurationError(f"unknown attention kind {attention_kind!r}")
        self.attention_kind = attention_kind
        self.backbone = Backbone(store, f"{label}.backbone", spec.channels, spec.H,
                                 spec.N, spec.k, spec.dropout, input_gain=input_gain)
        self.head = Dense(store, f"{label}.head", spec.H, spec.tau)

    def __call__(self, window: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor | None]:
        weights = None
        x = window
        if self.attention is not None:
            x, weights = self.attention(window)
        h = self.backbone(x, training, rng)
        return self.head(take_last_step(h)), weights


_BRANCH_WIRING = {
    "PSTA_TCN": (("spatial", "spatial"), ("temporal", "temporal")),
    "P_TCN": (("spatial", None), ("temporal", None)),
    "PSA_TCN": (("spatial", "spatial"), ("temporal", None)),
    "PTA_TCN": (("spatial", None), ("temporal", "temporal")),
    "TCN": (("main", None),),
}


class ForecastModel:
    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.params = ParamStore(spec.seed)
        self.branches = [
            Branch(self.params, label, spec, kind)
            for label, kind in _BRANCH_WIRING[spec.variant]
        ]

    def _check_window(self, window: Tensor) -> None:
        shape = window.shape
        trailing = shape[-2:]
        if len(shape) not in (2, 3) or trailing != (self.spec.channels, self.spec.T):
            raise ConfigurationError(
                f"window shape {shape} does not match spec "
                f"(channels={self.spec.channels}, T={self.spec.T})"
            )

    def forward(self, window, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        """Forecast tensor [tau] for a [C, T] window, [B, tau] for a [B, C, T] batch."""
        if not isinstance(window, Tensor):
            window = Tensor(window)
        self._check_window(window)
        if window.data.ndim == 3:
            # layers run channel-major; convert once at the public boundary
            window = transpose_axes(window, (1, 0, 2))
        outputs = [branch(window, training, rng)[0] for branch in self.branches]
        total = outputs[0]
        for other in outputs[1:]:
            total = add(total, other)
        return total

    def predict_multi(self, window) -> np.ndarray:
        """Direct multi-horizon forecast: one forward pass, all tau steps."""
        return self.forward(window, training=False).data

    def attention_weights(self, window) -> dict[str, np.ndarray]:
        """Per-sample attention matrices, keyed 'alpha' (spatial) / 'beta' (temporal)."""
        if not isinstance(window, Tensor):
            window = Tensor(window)
        self._check_window(window)
        dumps: dict[str, np.ndarray] = {}
        for branch in self.branches:
            if branch.attention_kind is not None:
                _, weights = branch(window, training=False)
                key = "alpha" if branch.attention_kind == "spatial" else "beta"
                dumps[key] = weights.data
        return dumps


def build(spec: ModelSpec) -> ForecastModel:
    """Deterministically initialize a model; same spec and seed, same bits."""
    return ForecastModel(spec)


def save_checkpoint(model: ForecastModel, path) -> None:
    """Versioned header (spec + parameter manifest) then raw little-endian
    float64 parameter data; round-trips bitwise."""
    names = model.params.names()
    header = {
        "version": _CHECKPOINT_VERSION,
        "spec": asdict(model.spec),
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(model.params[name].data, dtype="<f8").tobytes())


def load_checkpoint(path) -> ForecastModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise ConfigurationError(f"{path}: not a checkpoint file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != _CHECKPOINT_VERSION:
            raise ConfigurationError(f"{path}: unsupported checkpoint version {header.get('version')}")
        model = build(ModelSpec(**header["spec"]))
        for entry in header["params"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in model.params or model.params[name].shape != shape:
                raise ConfigurationError(f"{path}: parameter {name!r} does not match the spec wiring")
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ConfigurationError(f"{path}: truncated data for parameter {name!r}")
            model.params[name].data = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return model
