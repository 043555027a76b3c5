"""Causality and receptive field of the dilated-convolution backbone.

Perturbs a future time step and shows the past is bitwise unchanged, then
probes the gradient of the last output position to map exactly which input
steps can influence it: 1 + 2(k-1)(2^N - 1) of them.

Run:  python demos/02_causal_receptive_field.py
"""

import numpy as np

from pstatcn.layers import Backbone
from pstatcn.params import ParamStore
from pstatcn.tensor import Tensor, mul, sum_all

T = 64
backbone = Backbone(ParamStore(seed=7), "demo", c_in=2, hidden=4, levels=3, kernel_size=3)
print(f"levels=3, kernel=3 -> receptive field R = {backbone.receptive_field} steps")

rng = np.random.default_rng(1)
x = rng.normal(size=(2, T))
base = backbone(Tensor(x)).data

bumped = x.copy()
bumped[:, 40] += 100.0
out = backbone(Tensor(bumped)).data
unchanged = np.array_equal(out[:, :40], base[:, :40])
print(f"perturbing t=40: outputs at t<40 bitwise unchanged? {unchanged}")

probe_in = Tensor(x, requires_grad=True)
out = backbone(probe_in)
mask = np.zeros(out.shape)
mask[:, -1] = 1.0
sum_all(mul(out, Tensor(mask))).backward()
sensitivity = np.abs(probe_in.grad).sum(axis=0)
touched = np.flatnonzero(sensitivity)
print(f"last output position reads input positions {touched.min()}..{touched.max()} "
      f"({touched.size} of {T}; R={backbone.receptive_field})")
