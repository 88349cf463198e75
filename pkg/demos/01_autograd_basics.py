"""Tensors and reverse-mode gradients
=====================================

A walk through the autograd core: building feature maps, running the
network operators, and checking an analytic gradient against central
finite differences.
"""

import numpy as np

from earfa import Tensor, ops
from earfa.tensor import mul, tmean

rng = np.random.default_rng(0)

# Feature maps are (batch, channel, height, width).  Wrapping an array in a
# Tensor with requires_grad=True marks it as a differentiation target.
x = Tensor(rng.standard_normal((1, 8, 12, 12)), requires_grad=True, dtype=np.float64)
w = Tensor(rng.standard_normal((8, 8, 3, 3)) * 0.1, requires_grad=True, dtype=np.float64)
b = Tensor(np.zeros(8), requires_grad=True, dtype=np.float64)

# Same-padding convolution, then a channel shift, then pixel shuffle: the
# three structured operators the super-resolution blocks are built from.
y = ops.conv2d(x, w, b, padding=ops.same_padding(3))
y = ops.channel_shift(y)
y = ops.pixel_shuffle(y, 2)
print(f"conv -> shift -> shuffle: {x.shape} -> {y.shape}")

# A scalar loss lets backward() fill in gradients for every input.
loss = tmean(mul(y, y))
loss.backward()
print(f"loss = {loss.item():.6f}")
print(f"gradient shapes: x {x.grad.shape}, w {w.grad.shape}, b {b.grad.shape}")

# Spot-check one weight coordinate against central finite differences.
idx = (3, 2, 1, 1)
step = 1e-5


def loss_value():
    out = ops.pixel_shuffle(ops.channel_shift(
        ops.conv2d(x, w, b, padding=1)), 2)
    return tmean(mul(out, out)).item()


orig = w.data[idx]
w.data[idx] = orig + step
up = loss_value()
w.data[idx] = orig - step
down = loss_value()
w.data[idx] = orig
numeric = (up - down) / (2 * step)
print(f"analytic dL/dw{list(idx)} = {w.grad[idx]:+.10f}")
print(f"numeric  dL/dw{list(idx)} = {numeric:+.10f}")
print(f"agreement to {abs(w.grad[idx] - numeric):.2e}")
