"""Parallel spatial and temporal attention blocks.

Both blocks take the full input window (F = n exogenous channels plus the
target channel; [F, T] for one sample, [F, B, T] channel-major for a batch)
and return that window reweighted elementwise, plus the weight matrix:

  * spatial: per time step t, scores = W·x_t + b over the F channels, then a
    softmax across channels. Every column of the weight matrix sums to 1.
  * temporal: per channel i, scores = W·x^(i) + b over the T steps, then a
    softmax across time. Every row sums to 1.

The score maps are full square linear maps (F x F and T x T) so the weight at
one position can depend on the whole slice, and the weighted output is the
plain Hadamard product with no rescaling. In the channel-major layout both
score maps collapse to one GEMM on a reshaped view of the window.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .layers import softmax, _as_batched, _squeeze_batch
from .params import ParamStore
from .tensor import Tensor, make_node, mul, _accumulate

Array = np.ndarray


def _feature_scores(window: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """scores[f, b, t] = sum_g weight[f, g] * window[g, b, t] + bias[f]."""
    channels, batch, t_len = window.shape
    x2 = window.data.reshape(channels, batch * t_len)
    y = weight.data @ x2
    y += bias.data[:, None]

    def backward_fn(g):
        g2 = g.reshape(channels, batch * t_len)
        if weight.requires_grad:
            _accumulate(weight, g2 @ x2.T, owned=True)
        if bias.requires_grad:
            _accumulate(bias, g2.sum(axis=1), owned=True)
        if window.requires_grad:
            _accumulate(window, (weight.data.T @ g2).reshape(channels, batch, t_len), owned=True)

    return make_node(y.reshape(channels, batch, t_len), (window, weight, bias),
                     "feature_scores", backward_fn)


def _time_scores(window: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """scores[i, b, t] = sum_s weight[t, s] * window[i, b, s] + bias[t]."""
    channels, batch, t_len = window.shape
    x2 = window.data.reshape(channels * batch, t_len)
    out_data = (x2 @ weight.data.T + bias.data[None, :]).reshape(channels, batch, t_len)

    def backward_fn(g):
        g2 = g.reshape(channels * batch, t_len)
        if weight.requires_grad:
            _accumulate(weight, g2.T @ x2, owned=True)
        if bias.requires_grad:
            _accumulate(bias, g2.sum(axis=0), owned=True)
        if window.requires_grad:
            _accumulate(window, (g2 @ weight.data).reshape(channels, batch, t_len), owned=True)

    return make_node(out_data, (window, weight, bias), "time_scores", backward_fn)


class SpatialAttention:
    """Softmax reweighting across channels, one weight vector per time step."""

    def __init__(self, store: ParamStore, name: str, channels: int):
        self.channels = channels
        self.weight = store.register(f"{name}.weight", (channels, channels), fan_in=channels)
        self.bias = store.register(f"{name}.bias", (channels,))

    def __call__(self, window: Tensor) -> tuple[Tensor, Tensor]:
        w3, squeeze = _as_batched(window)
        if w3.shape[0] != self.channels:
            raise ConfigurationError(
                f"spatial attention built for {self.channels} channels, window has {w3.shape[0]}"
            )
        alpha = softmax(_feature_scores(w3, self.weight, self.bias), axis=0)
        weighted = mul(alpha, w3)
        return _squeeze_batch(weighted, squeeze), _squeeze_batch(alpha, squeeze)


class TemporalAttention:
    """Softmax reweighting across time steps, one weight vector per channel."""

    def __init__(self, store: ParamStore, name: str, window_size: int):
        self.window_size = window_size
        self.weight = store.register(f"{name}.weight", (window_size, window_size),
                                     fan_in=window_size)
        self.bias = store.register(f"{name}.bias", (window_size,))

    def __call__(self, window: Tensor) -> tuple[Tensor, Tensor]:
        w3, squeeze = _as_batched(window)
        if w3.shape[2] != self.window_size:
            raise ConfigurationError(
                f"temporal attention built for window size {self.window_size}, got {w3.shape[2]}"
            )
        beta = softmax(_time_scores(w3, self.weight, self.bias), axis=2)
        weighted = mul(beta, w3)
        return _squeeze_batch(weighted, squeeze), _squeeze_batch(beta, squeeze)
