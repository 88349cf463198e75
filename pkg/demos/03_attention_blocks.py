"""Inside the attention blocks
===============================

What entropy attention actually computes, and how channel shifting grows
the receptive field of large-kernel attention.
"""

import numpy as np

from earfa.blocks import EntropyAttention, ShiftingLargeKernelAttention
from earfa.ops import channel_var
from earfa.tensor import Tensor, no_grad

rng = np.random.default_rng(3)

# --- entropy attention -------------------------------------------------------
# Build a feature map where channels carry very different information:
# channel 0 is nearly constant (low entropy), channel 15 is high-variance
# texture (high entropy).
x = np.zeros((1, 16, 24, 24), dtype=np.float32)
for ch in range(16):
    x[0, ch] = (ch / 15.0) * rng.standard_normal((24, 24))
x[0, 0] = 0.01

ea = EntropyAttention(16, reduction=8, rng=rng)
with no_grad():
    variances = channel_var(Tensor(x)).data.reshape(-1)
    weights = ea.channel_weights(Tensor(x)).data.reshape(-1)
print("channel   variance   attention weight")
for ch in (0, 5, 10, 15):
    print(f"  {ch:2d}     {variances[ch]:9.4f}   {weights[ch]:+.4f}")
print("(weights are a learned map of the per-channel entropies; at random")
print(" init they respond to entropy but are not yet calibrated)")

# --- shifting large-kernel attention ------------------------------------------
# An impulse reveals the receptive field: every input pixel the output
# depends on lights up in the gradient.
slka = ShiftingLargeKernelAttention(10, k_dw=5, k_ddw=7, dilation=3, rng=rng)
print(f"\nstacked depthwise receptive field: {slka.receptive_field()} px per axis")

probe = Tensor(rng.standard_normal((1, 10, 31, 31)).astype(np.float32),
               requires_grad=True)
out = slka(probe)
seed = np.zeros_like(out.data)
seed[0, :, 15, 15] = 1.0  # one output position, all channels
out.backward(seed)
footprint = np.abs(probe.grad).sum(axis=(0, 1))
rows = np.where(footprint.sum(axis=1) > 0)[0]
cols = np.where(footprint.sum(axis=0) > 0)[0]
print(f"gradient footprint of one output pixel: "
      f"{rows.max() - rows.min() + 1} x {cols.max() - cols.min() + 1} px")
print("(the channel shift adds one pixel per side on top of the kernels)")
