"""Neural building blocks: causal dilated convolution, residual blocks,
stacked backbones, dense heads, softmax, dropout.

Sequence tensors are channel-major: a single sample is [C, T] and a batch is
[C, B, T] (channel, batch, time). Keeping the channel axis first lets the
convolution and attention score maps run as single GEMMs on reshaped views
instead of per-slice matmuls with transposed copies, which is where almost
all of the training time goes at this scale. Convolutions left-pad with
zeros so output length equals input length and position t never reads past
t. Kernel tap 0 is the oldest: output at t reads x[t - (k-1-j)*d] through
tap j.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .params import ParamStore
from .tensor import Tensor, add, make_node, matvec, relu, reshape, _accumulate

Array = np.ndarray


def _as_batched(x: Tensor) -> tuple[Tensor, bool]:
    """Promote a single [C, T] sample to a [C, 1, T] batch."""
    if x.data.ndim == 2:
        return reshape(x, (x.shape[0], 1, x.shape[1])), True
    if x.data.ndim == 3:
        return x, False
    raise ConfigurationError(f"expected [C, T] or [C, B, T] input, got shape {x.shape}")


def _squeeze_batch(x: Tensor, squeeze: bool) -> Tensor:
    if not squeeze:
        return x
    return reshape(x, (x.shape[0], x.shape[2]))


def _dilated_cols(block: Array, live: int, dilation: int) -> Array:
    """im2col for a zero-padded [C, B, T+pad] block -> [C*live, B*T]."""
    channels, batch, padded = block.shape
    t_len = padded - (live - 1) * dilation
    sc, sb, st = block.strides
    taps = np.lib.stride_tricks.as_strided(
        block, shape=(channels, live, batch, t_len), strides=(sc, st * dilation, sb, st)
    )
    return np.ascontiguousarray(taps).reshape(channels * live, batch * t_len)


def _conv_impl(x: Tensor, kernel: Tensor, bias: Tensor, dilation: int,
               fuse_relu: bool) -> Tensor:
    x3, squeeze = _as_batched(x)
    c_out, c_in, k = kernel.shape
    channels, batch, t_len = x3.shape
    if channels != c_in:
        raise ConfigurationError(
            f"conv input has {channels} channels, kernel expects {c_in}"
        )
    # Taps whose offset exceeds the sequence length only ever read padding;
    # drop them up front (their gradient is identically zero).
    live = min(k, (t_len - 1) // dilation + 1)
    dead = k - live
    pad = (live - 1) * dilation
    xpad = np.zeros((c_in, batch, t_len + pad), dtype=np.float64)
    xpad[:, :, pad:] = x3.data
    cols = _dilated_cols(xpad, live, dilation)
    w_live = kernel.data[:, :, dead:]
    w2 = np.ascontiguousarray(w_live).reshape(c_out, c_in * live)
    y = w2 @ cols
    y += bias.data[:, None]
    if fuse_relu:
        np.maximum(y, 0.0, out=y)
    out_data = y.reshape(c_out, batch, t_len)

    def backward_fn(g):
        if fuse_relu:
            g = g * (out_data > 0.0)
        g2 = g.reshape(c_out, batch * t_len)
        if bias.requires_grad:
            _accumulate(bias, g2.sum(axis=1), owned=True)
        if kernel.requires_grad:
            dk = np.zeros_like(kernel.data)
            dk[:, :, dead:] = (g2 @ cols.T).reshape(c_out, c_in, live)
            _accumulate(kernel, dk, owned=True)
        if x3.requires_grad:
            # dL/dx is the correlation of g with the time-flipped kernel:
            # right-pad g and run the same im2col GEMM as the forward pass.
            gpad = np.zeros((c_out, batch, t_len + pad), dtype=np.float64)
            gpad[:, :, :t_len] = g.reshape(c_out, batch, t_len)
            gcols = _dilated_cols(gpad, live, dilation)
            w_flip = np.ascontiguousarray(w_live[:, :, ::-1].transpose(1, 0, 2))
            dx = (w_flip.reshape(c_in, c_out * live) @ gcols).reshape(c_in, batch, t_len)
            _accumulate(x3, dx, owned=True)

    op = "causal_conv_relu" if fuse_relu else "causal_conv"
    out = make_node(out_data, (x3, kernel, bias), op, backward_fn)
    return _squeeze_batch(out, squeeze)


def causal_dilated_conv(x: Tensor, kernel: Tensor, bias: Tensor, dilation: int) -> Tensor:
    """Causal 1-D convolution with dilation; [C_in, (B,) T] -> [C_out, (B,) T].

    One GEMM over an im2col layout: the [C_in*live, B*T] column matrix holds
    the dilated taps feeding each output position, with positions before the
    series start reading zero.
    """
    return _conv_impl(x, kernel, bias, dilation, fuse_relu=False)


def softmax(v: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along one axis; outputs are positive and sum to 1."""
    out_data = v.data - np.max(v.data, axis=axis, keepdims=True)
    np.exp(out_data, out=out_data)
    out_data /= np.sum(out_data, axis=axis, keepdims=True)

    def backward_fn(g):
        if v.requires_grad:
            inner = np.sum(out_data * g, axis=axis, keepdims=True)
            _accumulate(v, out_data * (g - inner), owned=True)

    return make_node(out_data, (v,), "softmax", backward_fn)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map W·x + b; accepts [in] or batched [B, in]."""
    out_dim, in_dim = weight.shape
    if x.data.ndim == 1:
        if x.shape[0] != in_dim:
            raise ConfigurationError(f"dense: input {x.shape} vs weight {weight.shape}")
        return add(matvec(weight, x), bias)
    if x.data.ndim != 2 or x.shape[1] != in_dim:
        raise ConfigurationError(f"dense: input {x.shape} vs weight {weight.shape}")
    out_data = x.data @ weight.data.T + bias.data

    def backward_fn(g):
        if weight.requires_grad:
            _accumulate(weight, g.T @ x.data, owned=True)
        if bias.requires_grad:
            _accumulate(bias, g.sum(axis=0), owned=True)
        if x.requires_grad:
            _accumulate(x, g @ weight.data, owned=True)

    return make_node(out_data, (x, weight, bias), "dense", backward_fn)


def take_last_step(x: Tensor) -> Tensor:
    """[C, B, T] -> [B, C] slice of the final time position ([C, T] -> [C])."""
    if x.data.ndim == 2:
        def backward_2d(g):
            if x.requires_grad:
                dx = np.zeros_like(x.data)
                dx[:, -1] = g
                _accumulate(x, dx, owned=True)

        return make_node(np.ascontiguousarray(x.data[:, -1]), (x,), "last_step", backward_2d)

    def backward_fn(g):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[:, :, -1] = g.T
            _accumulate(x, dx, owned=True)

    return make_node(np.ascontiguousarray(x.data[:, :, -1].T), (x,), "last_step", backward_fn)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; the identity when not training or rate is zero."""
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigurationError("dropout with rate > 0 needs an rng during training")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g * mask, owned=True)

    return make_node(x.data * mask, (x,), "dropout", backward_fn)


class CausalConv1d:
    """Trainable causal dilated convolution layer."""

    def __init__(self, store: ParamStore, name: str, c_in: int, c_out: int,
                 kernel_size: int, dilation: int, init_scale: float = 1.0):
        if kernel_size < 1:
            raise ConfigurationError(f"kernel_size must be >= 1, got {kernel_size}")
        if dilation < 1:
            raise ConfigurationError(f"dilation must be >= 1, got {dilation}")
        self.dilation = dilation
        self.kernel_size = kernel_size
        self.kernel = store.register(f"{name}.kernel", (c_out, c_in, kernel_size),
                                     fan_in=c_in * kernel_size, init_scale=init_scale)
        self.bias = store.register(f"{name}.bias", (c_out,))

    def __call__(self, x: Tensor) -> Tensor:
        return causal_dilated_conv(x, self.kernel, self.bias, self.dilation)


class ResidualBlock:
    """ReLU(X + F(X)) with F = conv -> ReLU -> dropout -> conv -> ReLU -> dropout.

    A 1x1 convolution aligns the shortcut when channel counts differ.
    """

    def __init__(self, store: ParamStore, name: str, c_in: int, c_out: int,
                 kernel_size: int, dilation: int, dropout_rate: float = 0.0,
                 input_gain: float = 1.0):
        if not 0.0 <= dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
        self.conv1 = CausalConv1d(store, f"{name}.conv1", c_in, c_out, kernel_size, dilation,
                                  init_scale=input_gain)
        self.conv2 = CausalConv1d(store, f"{name}.conv2", c_out, c_out, kernel_size, dilation)
        self.downsample = None
        if c_in != c_out:
            self.downsample = CausalConv1d(store, f"{name}.downsample", c_in, c_out, 1, 1,
                                           init_scale=input_gain)
        self.dropout_rate = dropout_rate

    def __call__(self, x: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        h = _conv_impl(x, self.conv1.kernel, self.conv1.bias, self.conv1.dilation,
                       fuse_relu=True)
        h = dropout(h, self.dropout_rate, training, rng)
        h = _conv_impl(h, self.conv2.kernel, self.conv2.bias, self.conv2.dilation,
                       fuse_relu=True)
        h = dropout(h, self.dropout_rate, training, rng)
        shortcut = self.downsample(x) if self.downsample is not None else x
        return relu(add(shortcut, h))


class Backbone:
    """N residual blocks with dilations 1, 2, 4, ..., 2^(N-1)."""

    def __init__(self, store: ParamStore, name: str, c_in: int, hidden: int,
                 levels: int, kernel_size: int, dropout_rate: float = 0.0,
                 input_gain: float = 1.0):
        if levels < 1:
            raise ConfigurationError(f"levels must be >= 1, got {levels}")
        self.kernel_size = kernel_size
        self.levels = levels
        self.blocks = [
            ResidualBlock(
                store,
                f"{name}.block{i}",
                c_in if i == 0 else hidden,
                hidden,
                kernel_size,
                2**i,
                dropout_rate,
                input_gain=input_gain if i == 0 else 1.0,
            )
            for i in range(levels)
        ]

    @property
    def receptive_field(self) -> int:
        """Input steps visible from one output position: 1 + 2(k-1)(2^N - 1)."""
        return 1 + 2 * (self.kernel_size - 1) * (2**self.levels - 1)

    def __call__(self, x: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        h = x
        for block in self.blocks:
            h = block(h, training, rng)
        return h


class Dense:
    """Trainable affine output layer."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int):
        self.weight = store.register(f"{name}.weight", (out_dim, in_dim), fan_in=in_dim)
        self.bias = store.register(f"{name}.bias", (out_dim,))

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)
