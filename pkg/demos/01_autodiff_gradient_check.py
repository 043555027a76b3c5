"""Reverse-mode autodiff in action: differentiate a small expression and
verify every gradient against central finite differences.

Run:  python demos/01_autodiff_gradient_check.py
"""

import numpy as np

from pstatcn import Tensor, finite_diff_grad
from pstatcn.tensor import exp, matvec, mean_all, mul, sub

rng = np.random.default_rng(0)
w0 = rng.normal(size=(3, 4))
x0 = rng.normal(size=4)
target = rng.normal(size=3)


def loss_of(flat):
    w = Tensor(flat[:12].reshape(3, 4), requires_grad=True)
    x = Tensor(flat[12:], requires_grad=True)
    diff = sub(exp(matvec(w, x)), Tensor(target))
    return mean_all(mul(diff, diff)), w, x


flat = np.concatenate([w0.ravel(), x0])
loss, w, x = loss_of(flat)
loss.backward()
analytic = np.concatenate([w.grad.ravel(), x.grad])
numeric = finite_diff_grad(lambda f: float(loss_of(f)[0].data), flat, eps=1e-5)

print(f"loss                      : {loss.data.item():.6f}")
print(f"max |analytic - numeric|  : {np.max(np.abs(analytic - numeric)):.3e}")
print(f"analytic grad (first 5)   : {np.round(analytic[:5], 6)}")
print(f"numeric  grad (first 5)   : {np.round(numeric[:5], 6)}")
