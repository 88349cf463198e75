"""Image I/O, bicubic resampling, color conversion, patches, augmentation.

Images are float32 arrays shaped ``(n, 3, h, w)`` with values in [0, 1].
PNG (8-bit RGB) is the only supported file format; pixel values map to
[0, 1] by division by 255.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError, ValidationError

_LR_SUFFIX = re.compile(r"_x\d+$")


def load_png(path) -> np.ndarray:
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return rgb.transpose(2, 0, 1)[None]


def save_png(array: np.ndarray, path) -> None:
    arr = np.asarray(array)
    if arr.ndim == 4:
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DimensionError(f"expected (3, h, w) image, got {arr.shape}")
    bytes8 = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(bytes8.transpose(1, 2, 0)).save(path, format="PNG")


# -- bicubic resampling -------------------------------------------------------


def _cubic(t: np.ndarray) -> np.ndarray:
    # Keys kernel, a = -0.5.
    at = np.abs(t)
    at2, at3 = at * at, at * at * at
    out = np.where(at <= 1.0, 1.5 * at3 - 2.5 * at2 + 1.0,
                   np.where(at < 2.0, -0.5 * at3 + 2.5 * at2 - 4.0 * at + 2.0, 0.0))
    return out


def _resize_weights(in_len: int, out_len: int):
    """Tap indices (clamped to the edge) and normalized weights per output
    position.  Downscaling stretches the kernel for antialiasing."""
    ratio = out_len / in_len
    src = (np.arange(out_len) + 0.5) / ratio - 0.5
    kscale = min(ratio, 1.0)
    support = 2.0 / kscale
    left = np.floor(src - support).astype(np.int64) + 1
    taps = int(np.ceil(2 * support)) + 1
    offsets = np.arange(taps)
    idx = left[:, None] + offsets[None, :]
    weights = _cubic((src[:, None] - idx) * kscale) * kscale
    weights /= weights.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, in_len - 1), weights


def _resize_axis(x: np.ndarray, axis: int, out_len: int) -> np.ndarray:
    idx, weights = _resize_weights(x.shape[axis], out_len)
    taken = np.take(x, idx.reshape(-1), axis=axis)
    new_shape = list(x.shape)
    new_shape[axis:axis + 1] = [out_len, idx.shape[1]]
    taken = taken.reshape(new_shape)
    wshape = [1] * taken.ndim
    wshape[axis], wshape[axis + 1] = idx.shape
    return (taken * weights.reshape(wshape)).sum(axis=axis + 1)


def bicubic_resize(x: np.ndarray, factor: float) -> np.ndarray:
    """Separable bicubic resize of ``(n, c, h, w)`` by ``factor`` per axis.

    Uses the a = -0.5 kernel with edge-clamped sampling; when shrinking,
    the kernel is stretched to the output pitch (antialiasing) and weights
    renormalized.  Deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise DimensionError("bicubic_resize expects (n, c, h, w)")
    if factor <= 0:
        raise ValidationError("factor must be positive")
    out_h = int(round(x.shape[2] * factor))
    out_w = int(round(x.shape[3] * factor))
    if out_h < 1 or out_w < 1:
        raise ValidationError(f"output size {out_h}x{out_w} is empty")
    if out_h != x.shape[2]:
        x = _resize_axis(x, 2, out_h)
    if out_w != x.shape[3]:
        x = _resize_axis(x, 3, out_w)
    return x.astype(np.float32)


def rgb_to_y(x: np.ndarray) -> np.ndarray:
    """BT.601 luma (limited range) from RGB in [0, 1]: ``(n, 1, h, w)``."""
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != 3:
        raise DimensionError("rgb_to_y expects (n, 3, h, w)")
    r, g, b = x[:, 0], x[:, 1], x[:, 2]
    y = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
    return y[:, None]


# -- dataset handling ---------------------------------------------------------


@dataclass
class ImagePair:
    """An HR image with its synthesized LR counterpart."""

    hr: np.ndarray
    lr: np.ndarray
    scale: int
    name: str = ""


def make_pair(hr: np.ndarray, scale: int, name: str = "") -> ImagePair:
    """Crop HR to a multiple of ``scale`` and synthesize the bicubic LR."""
    hr = np.asarray(hr, dtype=np.float32)
    h = hr.shape[2] - hr.shape[2] % scale
    w = hr.shape[3] - hr.shape[3] % scale
    if h < scale or w < scale:
        raise ValidationError(f"image too small for scale {scale}")
    hr = hr[:, :, :h, :w]
    lr = bicubic_resize(hr, 1.0 / scale)
    return ImagePair(hr=hr, lr=lr, scale=scale, name=name)


def scan_dataset(directory, scale: int, cache_lr: bool = False) -> list[ImagePair]:
    """Load every HR PNG in ``directory``.

    Files whose stem ends in ``_x<N>`` are treated as cached LR images, not
    HR sources.  With ``cache_lr`` the synthesized LR is written beside the
    HR file as ``<name>_x<scale>.png`` and reused on later scans.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    pairs = []
    for path in sorted(directory.glob("*.png")):
        if _LR_SUFFIX.search(path.stem):
            continue
        hr = load_png(path)
        h = hr.shape[2] - hr.shape[2] % scale
        w = hr.shape[3] - hr.shape[3] % scale
        hr = hr[:, :, :h, :w]
        lr_path = path.with_name(f"{path.stem}_x{scale}.png")
        if lr_path.exists():
            lr = load_png(lr_path)
            if lr.shape[2:] != (h // scale, w // scale):
                lr = bicubic_resize(hr, 1.0 / scale)
        else:
            lr = bicubic_resize(hr, 1.0 / scale)
            if cache_lr:
                save_png(lr, lr_path)
        pairs.append(ImagePair(hr=hr, lr=lr, scale=scale, name=path.stem))
    return pairs


def sample_patch(pair: ImagePair, lr_size: int, rng: np.random.Generator):
    """Aligned random LR/HR crops; the HR crop is ``lr_size * scale`` square."""
    _, _, h, w = pair.lr.shape
    if h < lr_size or w < lr_size:
        raise ValidationError(f"image '{pair.name}' smaller than patch size {lr_size}")
    y = int(rng.integers(0, h - lr_size + 1))
    x = int(rng.integers(0, w - lr_size + 1))
    s = pair.scale
    lr = pair.lr[:, :, y:y + lr_size, x:x + lr_size]
    hr = pair.hr[:, :, s * y:s * (y + lr_size), s * x:s * (x + lr_size)]
    return lr, hr


def synthetic_image(rng: np.random.Generator, height: int = 96,
                     width: int = 96) -> np.ndarray:
    """Structured random test image ``(1, 3, h, w)`` for desk-scale runs.

    A smooth color gradient overlaid with sharp-edged rectangles, disks and
    sinusoidal gratings; enough high-frequency content that plain
    interpolation visibly underperforms on it.  Needs at least 24x24.
    """
    if height < 24 or width < 24:
        raise ValidationError("synthetic images need at least 24x24 pixels")
    ys, xs = np.mgrid[0:height, 0:width]
    img = np.empty((3, height, width), dtype=np.float32)
    for ch in range(3):
        gx, gy, off = rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.2, 0.8)
        img[ch] = off + gx * xs / width + gy * ys / height

    for _ in range(12):
        y0 = int(rng.integers(0, max(height - 8, 1)))
        x0 = int(rng.integers(0, max(width - 8, 1)))
        hh = int(rng.integers(4, height // 3))
        ww = int(rng.integers(4, width // 3))
        img[:, y0:y0 + hh, x0:x0 + ww] = rng.random(3)[:, None, None]

    for _ in range(4):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        radius = rng.uniform(3, min(height, width) / 6)
        mask = (ys - cy) ** 2 + (xs - cx) ** 2 <= radius * radius
        img[:, mask] = rng.random(3)[:, None]

    for _ in range(4):
        y0 = int(rng.integers(0, max(height - 12, 1)))
        x0 = int(rng.integers(0, max(width - 12, 1)))
        hh = int(rng.integers(8, height // 2))
        ww = int(rng.integers(8, width // 2))
        freq = rng.uniform(0.5, 1.6)
        theta = rng.uniform(0, np.pi)
        phase = (np.cos(theta) * xs[y0:y0 + hh, x0:x0 + ww]
                 + np.sin(theta) * ys[y0:y0 + hh, x0:x0 + ww])
        grating = 0.5 + 0.5 * np.sin(freq * phase)
        color = rng.random(3)
        img[:, y0:y0 + hh, x0:x0 + ww] = (
            color[:, None, None] * grating + (1 - color)[:, None, None] * (1 - grating))

    for _ in range(6):
        if rng.random() < 0.5:
            row = int(rng.integers(0, height))
            img[:, row:row + 1, :] = rng.random(3)[:, None, None]
        else:
            col = int(rng.integers(0, width))
            img[:, :, col:col + 1] = rng.random(3)[:, None, None]

    return np.clip(img, 0.0, 1.0)[None].astype(np.float32)


def synthetic_dataset(seed: int, count: int, scale: int, height: int = 96,
                      width: int = 96) -> list[ImagePair]:
    """A reproducible list of synthetic HR/LR pairs."""
    rng = np.random.default_rng(seed)
    return [make_pair(synthetic_image(rng, height, width), scale, name=f"synth{i:02d}")
            for i in range(count)]


# -- dihedral augmentation ------------------------------------------------------


def dihedral(x: np.ndarray, op: int) -> np.ndarray:
    """Apply one of the 8 square symmetries to the spatial axes.

    ``op & 3`` counts quarter rotations, ``op & 4`` adds a horizontal flip
    (applied after the rotation).  ``op = 0`` is the identity.
    """
    if not 0 <= op < 8:
        raise ValidationError(f"dihedral op must be in [0, 8), got {op}")
    out = np.rot90(x, k=op & 3, axes=(-2, -1))
    if op & 4:
        out = np.flip(out, axis=-1)
    return np.ascontiguousarray(out)


def dihedral_inverse(x: np.ndarray, op: int) -> np.ndarray:
    """Inverse of :func:`dihedral` with the same ``op``."""
    if not 0 <= op < 8:
        raise ValidationError(f"dihedral op must be in [0, 8), got {op}")
    out = np.flip(x, axis=-1) if op & 4 else x
    out = np.rot90(out, k=-(op & 3), axes=(-2, -1))
    return np.ascontiguousarray(out)


def augment_pair(lr: np.ndarray, hr: np.ndarray, op: int):
    """Apply the same dihedral transform to an aligned LR/HR pair."""
    return dihedral(lr, op), dihedral(hr, op)
