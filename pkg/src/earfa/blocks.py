"""Building blocks: entropy attention, (shifting) large-kernel attention,
squeeze-excitation, the spatial-gate feed-forward network, and the
dual-attention block that composes them with residual connections."""

from __future__ import annotations

import numpy as np

from . import ops
from .entropy import VAR_FLOOR
from .errors import ConfigError
from .tensor import Tensor, add, mul, relu, sigmoid


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal draw with values beyond two standard deviations re-drawn."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while np.any(bad):
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out.astype(np.float32)


def conv_param(rng, c_out, c_in_per_group, k):
    w = Tensor(trunc_normal(rng, (c_out, c_in_per_group, k, k)), requires_grad=True)
    b = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)
    return w, b


class ChannelLayerNorm:
    """Per-position normalization over channels with learned affine."""

    def __init__(self, channels: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)

    def named_params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]


class EntropyAttention:
    """Channel reweighting driven by per-channel Gaussian differential entropy.

    Pipeline: 1x1 reduce to ``c / reduction`` channels, per-channel entropy
    of the spatial samples, sigmoid, learned linear expansion back to ``c``
    weights, broadcast multiply with the input.
    """

    def __init__(self, channels: int, reduction: int = 8, var_eps: float = VAR_FLOOR,
                 rng: np.random.Generator | None = None):
        if channels < reduction:
            raise ConfigError(f"channels={channels} below reduction={reduction}")
        rng = rng or np.random.default_rng(0)
        reduced = channels // reduction
        self.var_eps = var_eps
        self.dec_w, self.dec_b = conv_param(rng, reduced, channels, 1)
        self.inc_w, self.inc_b = conv_param(rng, channels, reduced, 1)

    def __call__(self, x: Tensor) -> Tensor:
        z = ops.conv2d(x, self.dec_w, self.dec_b)
        h = ops.channel_entropy(z, self.var_eps)          # (n, c/r, 1, 1)
        s = sigmoid(h)
        w = ops.conv2d(s, self.inc_w, self.inc_b)         # (n, c, 1, 1)
        return mul(x, w)

    def channel_weights(self, x: Tensor) -> Tensor:
        """The realized per-channel weight vector, shaped ``(n, c, 1, 1)``."""
        z = ops.conv2d(x, self.dec_w, self.dec_b)
        return ops.conv2d(sigmoid(ops.channel_entropy(z, self.var_eps)),
                          self.inc_w, self.inc_b)

    def named_params(self):
        return [("dec.w", self.dec_w), ("dec.b", self.dec_b),
                ("inc.w", self.inc_w), ("inc.b", self.inc_b)]


class LargeKernelAttention:
    """Pointwise conv, depthwise conv, dilated depthwise conv; gates the input."""

    shifted = False

    def __init__(self, channels: int, k_dw: int = 5, k_ddw: int = 7, dilation: int = 3,
                 shift_px: int = 1, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.k_dw, self.k_ddw, self.dilation = k_dw, k_ddw, dilation
        self.shift_px = shift_px
        self.pw_w, self.pw_b = conv_param(rng, channels, channels, 1)
        self.dw_w, self.dw_b = conv_param(rng, channels, 1, k_dw)
        self.ddw_w, self.ddw_b = conv_param(rng, channels, 1, k_ddw)

    def __call__(self, x: Tensor) -> Tensor:
        a = ops.channel_shift(x, self.shift_px) if self.shifted else x
        a = ops.conv2d(a, self.pw_w, self.pw_b)
        a = ops.conv2d(a, self.dw_w, self.dw_b, padding=ops.same_padding(self.k_dw),
                       groups=self.channels)
        a = ops.conv2d(a, self.ddw_w, self.ddw_b,
                       padding=ops.same_padding(self.k_ddw, self.dilation),
                       dilation=self.dilation, groups=self.channels)
        return mul(a, x)

    def receptive_field(self) -> int:
        """Per-axis receptive field of the two stacked depthwise stages."""
        return (self.k_dw - 1) + self.dilation * (self.k_ddw - 1) + 1

    def named_params(self):
        return [("pw.w", self.pw_w), ("pw.b", self.pw_b),
                ("dw.w", self.dw_w), ("dw.b", self.dw_b),
                ("ddw.w", self.ddw_w), ("ddw.b", self.ddw_b)]


class ShiftingLargeKernelAttention(LargeKernelAttention):
    """Large-kernel attention with a channel shift ahead of the 1x1 conv."""

    shifted = True


class SqueezeExcitation:
    """Pool, bottleneck, sigmoid channel reweighting (ablation baseline)."""

    def __init__(self, channels: int, reduction: int = 8,
                 rng: np.random.Generator | None = None):
        if channels < reduction:
            raise ConfigError(f"channels={channels} below reduction={reduction}")
        rng = rng or np.random.default_rng(0)
        reduced = channels // reduction
        self.red_w, self.red_b = conv_param(rng, reduced, channels, 1)
        self.exp_w, self.exp_b = conv_param(rng, channels, reduced, 1)

    def __call__(self, x: Tensor) -> Tensor:
        p = ops.channel_mean(x)
        a = relu(ops.conv2d(p, self.red_w, self.red_b))
        w = sigmoid(ops.conv2d(a, self.exp_w, self.exp_b))
        return mul(x, w)

    def named_params(self):
        return [("red.w", self.red_w), ("red.b", self.red_b),
                ("exp.w", self.exp_w), ("exp.b", self.exp_b)]


class SpatialGateFFN:
    """Expand, split, depthwise spatial gate on one half, project back."""

    def __init__(self, channels: int, hidden: int, k_gate: int = 5,
                 rng: np.random.Generator | None = None):
        if hidden % 2:
            raise ConfigError(f"hidden width {hidden} must be even")
        rng = rng or np.random.default_rng(0)
        self.k_gate = k_gate
        half = hidden // 2
        self.in_w, self.in_b = conv_param(rng, hidden, channels, 1)
        self.gate_w, self.gate_b = conv_param(rng, half, 1, k_gate)
        self.out_w, self.out_b = conv_param(rng, channels, half, 1)

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.conv2d(x, self.in_w, self.in_b)
        g1, g2 = ops.split_channels(h, 2)
        gate = ops.conv2d(g2, self.gate_w, self.gate_b,
                          padding=ops.same_padding(self.k_gate),
                          groups=g2.shape[1])
        return ops.conv2d(mul(g1, gate), self.out_w, self.out_b)

    def named_params(self):
        return [("in.w", self.in_w), ("in.b", self.in_b),
                ("gate.w", self.gate_w), ("gate.b", self.gate_b),
                ("out.w", self.out_w), ("out.b", self.out_b)]


SPATIAL_ATTENTIONS = ("slka", "lka", "none")
CHANNEL_ATTENTIONS = ("ea", "se", "none")


class DualAttentionBlock:
    """Residual cascade: spatial attention, FFN, channel attention, FFN.

    Each stage is layer-normalized and added back to its input.  Either
    attention stage can be dropped entirely (its normalization included)
    or swapped for its ablation baseline.
    """

    def __init__(self, channels: int, k_dw: int = 5, k_ddw: int = 7, dilation: int = 3,
                 k_sgfn: int = 5, hidden: int | None = None, reduction: int = 8,
                 spatial: str = "slka", channel: str = "ea",
                 rng: np.random.Generator | None = None):
        if spatial not in SPATIAL_ATTENTIONS:
            raise ConfigError(f"unknown spatial attention '{spatial}'")
        if channel not in CHANNEL_ATTENTIONS:
            raise ConfigError(f"unknown channel attention '{channel}'")
        rng = rng or np.random.default_rng(0)
        hidden = 2 * channels if hidden is None else hidden
        self.spatial_kind, self.channel_kind = spatial, channel

        if spatial == "slka":
            self.norm1 = ChannelLayerNorm(channels)
            self.spatial = ShiftingLargeKernelAttention(channels, k_dw, k_ddw, dilation, rng=rng)
        elif spatial == "lka":
            self.norm1 = ChannelLayerNorm(channels)
            self.spatial = LargeKernelAttention(channels, k_dw, k_ddw, dilation, rng=rng)
        else:
            self.norm1 = self.spatial = None

        self.norm2 = ChannelLayerNorm(channels)
        self.ffn1 = SpatialGateFFN(channels, hidden, k_sgfn, rng=rng)

        if channel == "ea":
            self.norm3 = ChannelLayerNorm(channels)
            self.channel = EntropyAttention(channels, reduction, rng=rng)
        elif channel == "se":
            self.norm3 = ChannelLayerNorm(channels)
            self.channel = SqueezeExcitation(channels, reduction, rng=rng)
        else:
            self.norm3 = self.channel = None

        self.norm4 = ChannelLayerNorm(channels)
        self.ffn2 = SpatialGateFFN(channels, hidden, k_sgfn, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        if self.spatial is not None:
            x = add(self.spatial(self.norm1(x)), x)
        x = add(self.ffn1(self.norm2(x)), x)
        if self.channel is not None:
            x = add(self.channel(self.norm3(x)), x)
        x = add(self.ffn2(self.norm4(x)), x)
        return x

    def named_params(self):
        groups = []
        if self.spatial is not None:
            kind = "slka" if self.spatial.shifted else "lka"
            groups += [("ln1", self.norm1), (kind, self.spatial)]
        groups += [("ln2", self.norm2), ("sgfn1", self.ffn1)]
        if self.channel is not None:
            groups += [("ln3", self.norm3), (self.channel_kind, self.channel)]
        groups += [("ln4", self.norm4), ("sgfn2", self.ffn2)]
        out = []
        for prefix, block in groups:
            out += [(f"{prefix}.{name}", p) for name, p in block.named_params()]
        return out
