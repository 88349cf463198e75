"""Network operators over NCHW tensors, each with a reverse-mode gradient.

Convolutions follow the usual cross-correlation convention.  All
in-network convolutions are used with "same" padding
(``padding = dilation * (k - 1) / 2`` for odd ``k``) so spatial size is
preserved; the functions themselves accept any valid padding.
"""

from __future__ import annotations

import numpy as np

from .entropy import VAR_FLOOR, gaussian_entropy
from .errors import ConfigError, DimensionError
from .tensor import Tensor, _result

# Channel-shift group order and directions, expressed as the source offset:
# out[y, x] = in[y + dy, x + dx], zero where the source falls outside.
SHIFT_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1), (0, 0))  # up, down, left, right, hold


# -- convolution -------------------------------------------------------------


def _conv_out_size(n: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (n + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def _pad_spatial(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(xp: np.ndarray, k: int, stride: int, dilation: int, ho: int, wo: int):
    # Zero-copy (n, c, ho, wo, k, k) view over the padded input.
    n, c, _, _ = xp.shape
    sn, sc, sh, sw = xp.strides
    shape = (n, c, ho, wo, k, k)
    strides = (sn, sc, sh * stride, sw * stride, sh * dilation, sw * dilation)
    return np.lib.stride_tricks.as_strided(xp, shape, strides, writeable=False)


def _dw_slices(p: int, q: int, stride: int, dilation: int, ho: int, wo: int):
    return (slice(p * dilation, p * dilation + (ho - 1) * stride + 1, stride),
            slice(q * dilation, q * dilation + (wo - 1) * stride + 1, stride))


def _conv_forward(xd, wd, stride, padding, dilation, groups):
    n, cin, _, _ = xd.shape
    cout, _, k, _ = wd.shape
    ho = _conv_out_size(xd.shape[2], k, stride, padding, dilation)
    wo = _conv_out_size(xd.shape[3], k, stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise DimensionError("convolution output would be empty")
    xp = _pad_spatial(xd, padding)

    if groups == cin and cout == cin:
        # Depthwise: accumulate k*k shifted, per-channel-weighted slices.
        y = np.zeros((n, cin, ho, wo), dtype=xd.dtype)
        for p in range(k):
            for q in range(k):
                ys, xs = _dw_slices(p, q, stride, dilation, ho, wo)
                y += xp[:, :, ys, xs] * wd[:, 0, p, q][:, None, None]
        return y

    if groups == 1:
        win = _windows(xp, k, stride, dilation, ho, wo)
        y = np.tensordot(win, wd, axes=((1, 4, 5), (1, 2, 3)))  # (n, ho, wo, cout)
        return np.ascontiguousarray(y.transpose(0, 3, 1, 2))

    cg, og = cin // groups, cout // groups
    parts = [_conv_forward(xd[:, g * cg:(g + 1) * cg], wd[g * og:(g + 1) * og],
                           stride, padding, dilation, 1)
             for g in range(groups)]
    return np.concatenate(parts, axis=1)


def _conv_backward(gy, xd, wd, stride, padding, dilation, groups):
    n, cin, h, w = xd.shape
    cout, _, k, _ = wd.shape
    _, _, ho, wo = gy.shape
    xp = _pad_spatial(xd, padding)

    if groups == cin and cout == cin:
        gw = np.zeros_like(wd)
        gxp = np.zeros_like(xp)
        for p in range(k):
            for q in range(k):
                ys, xs = _dw_slices(p, q, stride, dilation, ho, wo)
                gw[:, 0, p, q] = np.einsum("nchw,nchw->c", gy, xp[:, :, ys, xs])
                gxp[:, :, ys, xs] += gy * wd[:, 0, p, q][:, None, None]
    elif groups == 1:
        win = _windows(xp, k, stride, dilation, ho, wo)
        gw = np.tensordot(gy, win, axes=((0, 2, 3), (0, 2, 3)))  # (cout, cin, k, k)
        gcols = np.tensordot(gy, wd, axes=(1, 0))  # (n, ho, wo, cin, k, k)
        gxp = np.zeros_like(xp)
        for p in range(k):
            for q in range(k):
                ys, xs = _dw_slices(p, q, stride, dilation, ho, wo)
                gxp[:, :, ys, xs] += gcols[:, :, :, :, p, q].transpose(0, 3, 1, 2)
    else:
        cg, og = cin // groups, cout // groups
        gxs, gws = [], []
        for g in range(groups):
            gx_g, gw_g = _conv_backward(gy[:, g * og:(g + 1) * og],
                                        xd[:, g * cg:(g + 1) * cg],
                                        wd[g * og:(g + 1) * og],
                                        stride, padding, dilation, 1)
            gxs.append(gx_g)
            gws.append(gw_g)
        return np.concatenate(gxs, axis=1), np.concatenate(gws, axis=0)

    if padding:
        gx = gxp[:, :, padding:padding + h, padding:padding + w]
    else:
        gx = gxp
    return np.ascontiguousarray(gx), gw


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1,
           padding: int = 0, dilation: int = 1, groups: int = 1) -> Tensor:
    """2-D convolution of ``x (n, c_in, h, w)`` with ``w (c_out, c_in/groups, k, k)``.

    Equivalent to the direct quadruple-loop definition:
    ``y[n,o,i,j] = b[o] + sum_{c,p,q} w[o,c,p,q] *
    x[n, g(o)+c, i*stride + p*dilation - padding, j*stride + q*dilation - padding]``
    with out-of-range taps reading zero.
    """
    xd, wd = x.data, w.data
    if xd.ndim != 4 or wd.ndim != 4:
        raise DimensionError("conv2d expects 4-D input and kernel")
    if wd.shape[2] != wd.shape[3]:
        raise DimensionError("conv2d kernels must be square")
    cin, cout = xd.shape[1], wd.shape[0]
    if groups < 1 or cin % groups or cout % groups:
        raise ConfigError(f"groups={groups} must divide c_in={cin} and c_out={cout}")
    if wd.shape[1] != cin // groups:
        raise DimensionError(
            f"kernel expects {wd.shape[1] * groups} input channels, got {cin}")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ConfigError("stride/dilation must be >= 1 and padding >= 0")
    if b is not None and b.data.shape != (cout,):
        raise DimensionError(f"bias must have shape ({cout},)")

    y = _conv_forward(xd, wd, stride, padding, dilation, groups)
    if b is not None:
        y += b.data[None, :, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        gx, gw = _conv_backward(g, xd, wd, stride, padding, dilation, groups)
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return _result(y, parents, "conv2d", backward)


def same_padding(k: int, dilation: int = 1) -> int:
    """Padding preserving spatial size for an odd kernel."""
    if k % 2 == 0:
        raise ConfigError("same padding requires an odd kernel size")
    return dilation * (k - 1) // 2


# -- normalization -----------------------------------------------------------


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the channel dimension at each spatial position.

    Statistics use the population (divide-by-c) convention; ``gamma`` and
    ``beta`` are per-channel affine parameters.
    """
    xd = x.data
    if xd.ndim != 4 or xd.shape[1] == 0:
        raise DimensionError("layer_norm expects 4-D input with at least one channel")
    c = xd.shape[1]
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise DimensionError(f"gamma/beta must have shape ({c},)")
    if eps <= 0:
        raise ConfigError("eps must be positive")

    mu = xd.mean(axis=1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def backward(g):
        gh = g * gamma.data[None, :, None, None]
        gx = inv * (gh - gh.mean(axis=1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=1, keepdims=True))
        return gx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3))

    return _result(y, (x, gamma, beta), "layer_norm", backward)


# -- channel shifting --------------------------------------------------------


def shift_group_sizes(c: int) -> list[int]:
    """Sizes of the five contiguous shift groups for ``c`` channels."""
    base, rem = divmod(c, 5)
    return [base + 1] * rem + [base] * (5 - rem)


def _translate(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    # out[y, x] = a[y + dy, x + dx]; zero fill outside.
    h, w = a.shape[2], a.shape[3]
    out = np.zeros_like(a)
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 < y1 and x0 < x1:
        out[:, :, y0:y1, x0:x1] = a[:, :, y0 + dy:y1 + dy, x0 + dx:x1 + dx]
    return out


def channel_shift(x: Tensor, shift_px: int = 1) -> Tensor:
    """Shift four of five contiguous channel groups by one step each.

    Groups are taken in index order [up, down, left, right, identity]; the
    first ``c mod 5`` groups take the extra channel.  Vacated positions are
    zero-filled, so the operator is linear and shape-preserving.
    """
    xd = x.data
    if xd.ndim != 4:
        raise DimensionError("channel_shift expects 4-D input")
    if xd.shape[1] < 5:
        raise ConfigError("channel_shift needs at least 5 channels")
    if shift_px < 1:
        raise ConfigError("shift_px must be >= 1")

    bounds = np.cumsum([0] + shift_group_sizes(xd.shape[1]))
    y = np.empty_like(xd)
    for (dy, dx), lo, hi in zip(SHIFT_DIRECTIONS, bounds[:-1], bounds[1:]):
        y[:, lo:hi] = _translate(xd[:, lo:hi], dy * shift_px, dx * shift_px)

    def backward(g):
        gx = np.empty_like(g)
        for (dy, dx), lo, hi in zip(SHIFT_DIRECTIONS, bounds[:-1], bounds[1:]):
            gx[:, lo:hi] = _translate(g[:, lo:hi], -dy * shift_px, -dx * shift_px)
        return (gx,)

    return _result(y, (x,), "channel_shift", backward)


# -- rearrangement -----------------------------------------------------------


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange ``(n, c, h, w)`` into ``(n, c/r^2, h*r, w*r)``.

    Mapping convention: ``out[n, c, h*r + i, w*r + j] = in[n, c*r^2 + i*r + j, h, w]``.
    """
    xd = x.data
    n, c, h, w = xd.shape
    if r < 1 or c % (r * r):
        raise DimensionError(f"channels {c} not divisible by r^2 = {r * r}")
    co = c // (r * r)
    y = xd.reshape(n, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, co, h * r, w * r)
    y = np.ascontiguousarray(y)

    def backward(g):
        gx = g.reshape(n, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c, h, w)
        return (np.ascontiguousarray(gx),)

    return _result(y, (x,), "pixel_shuffle", backward)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Exact index-inverse of :func:`pixel_shuffle`."""
    xd = x.data
    n, c, h, w = xd.shape
    if r < 1 or h % r or w % r:
        raise DimensionError(f"spatial size ({h}, {w}) not divisible by r = {r}")
    ho, wo = h // r, w // r
    y = xd.reshape(n, c, ho, r, wo, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, ho, wo)
    y = np.ascontiguousarray(y)

    def backward(g):
        gx = g.reshape(n, c, r, r, ho, wo).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h, w)
        return (np.ascontiguousarray(gx),)

    return _result(y, (x,), "pixel_unshuffle", backward)


def split_channels(x: Tensor, parts: int = 2) -> tuple:
    """Split into ``parts`` equal contiguous channel slices."""
    xd = x.data
    c = xd.shape[1]
    if parts < 1 or c % parts:
        raise DimensionError(f"cannot split {c} channels into {parts} equal parts")
    cs = c // parts
    outs = []
    for i in range(parts):
        lo = i * cs

        def backward(g, lo=lo):
            gx = np.zeros_like(xd)
            gx[:, lo:lo + cs] = g
            return (gx,)

        outs.append(_result(np.ascontiguousarray(xd[:, lo:lo + cs]), (x,),
                            "split_channels", backward))
    return tuple(outs)


# -- per-channel statistics ---------------------------------------------------


def channel_variance(data: np.ndarray) -> np.ndarray:
    """Population variance over ``(h, w)`` per ``(n, c)``, single pass.

    Plain-ndarray kernel shared by the autograd op and the entropy
    benchmark.  Uses ``E[x^2] - E[x]^2`` with a clamp at zero to absorb
    cancellation error.
    """
    n, c, h, w = data.shape
    hw = h * w
    s = np.einsum("nchw->nc", data)
    ss = np.einsum("nchw,nchw->nc", data, data)
    return np.maximum(ss / hw - (s / hw) ** 2, 0.0)


def channel_var(x: Tensor) -> Tensor:
    """Population variance per ``(n, c)``, shaped ``(n, c, 1, 1)``."""
    xd = x.data
    if xd.ndim != 4:
        raise DimensionError("channel_var expects 4-D input")
    hw = xd.shape[2] * xd.shape[3]
    v = channel_variance(xd).astype(xd.dtype)[:, :, None, None]
    mu = xd.mean(axis=(2, 3), keepdims=True)

    def backward(g):
        return (g * (2.0 / hw) * (xd - mu),)

    return _result(v, (x,), "channel_var", backward)


def channel_mean(x: Tensor) -> Tensor:
    """Mean per ``(n, c)``, shaped ``(n, c, 1, 1)`` (global average pool)."""
    xd = x.data
    if xd.ndim != 4:
        raise DimensionError("channel_mean expects 4-D input")
    hw = xd.shape[2] * xd.shape[3]
    m = xd.mean(axis=(2, 3), keepdims=True)

    def backward(g):
        return (np.broadcast_to(g / hw, xd.shape).copy(),)

    return _result(m, (x,), "channel_mean", backward)


def channel_entropy(x: Tensor, eps: float = VAR_FLOOR) -> Tensor:
    """Gaussian differential entropy per channel's spatial samples.

    Composes :func:`channel_var` with the closed form
    ``0.5 ln(2 pi (var + eps))``; differentiable so attention weights can
    be trained through it.
    """
    v = channel_var(x)
    vd = v.data
    h = gaussian_entropy(vd, eps).astype(vd.dtype)

    def backward(g):
        return (g / (2.0 * (vd + eps)),)

    return _result(h, (v,), "gaussian_entropy", backward)
