"""PSNR and SSIM on [0, 1] images.

Scores are evaluated on whatever array is passed in; the benchmark
convention (Y channel, ``shave = scale`` border pixels) is applied by
:func:`y_channel_scores`.
"""

from __future__ import annotations

import math

import numpy as np

from .data import rgb_to_y
from .errors import DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _shaved(a: np.ndarray, b: np.ndarray, shave: int):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if shave:
        a = a[..., shave:-shave, shave:-shave]
        b = b[..., shave:-shave, shave:-shave]
    if a.size == 0:
        raise DimensionError("nothing left after shaving the border")
    return a, b


def psnr(a, b, shave: int = 0) -> float:
    """Peak signal-to-noise ratio in dB with MAX = 1.0.

    Identical inputs yield the ``inf`` sentinel.
    """
    a, b = _shaved(a, b, shave)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    t = np.arange(size) - half
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable valid-mode filtering of a 2-D array; the window axis is
    # appended last, so the matmul contracts it.
    size = kernel.size
    tmp = np.lib.stride_tricks.sliding_window_view(img, size, axis=1) @ kernel
    return np.lib.stride_tricks.sliding_window_view(tmp, size, axis=0) @ kernel


def ssim(a, b, shave: int = 0) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5) on [0, 1] data.

    Accepts 2-D maps or single-channel 4-D tensors.
    """
    a, b = _shaved(a, b, shave)
    if a.ndim == 4:
        if a.shape[1] != 1:
            raise DimensionError("ssim expects a single channel")
        return float(np.mean([_ssim_2d(a[i, 0], b[i, 0]) for i in range(a.shape[0])]))
    if a.ndim != 2:
        raise DimensionError("ssim expects 2-D maps or (n, 1, h, w)")
    return _ssim_2d(a, b)


def _ssim_2d(a: np.ndarray, b: np.ndarray) -> float:
    if min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    kernel = _gaussian_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_a = _filter_valid(a, kernel)
    mu_b = _filter_valid(b, kernel)
    var_a = _filter_valid(a * a, kernel) - mu_a * mu_a
    var_b = _filter_valid(b * b, kernel) - mu_b * mu_b
    cov = _filter_valid(a * b, kernel) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def y_channel_scores(sr: np.ndarray, hr: np.ndarray, shave: int) -> tuple[float, float]:
    """(PSNR, SSIM) on the BT.601 Y channel with a shaved border."""
    ys, yh = rgb_to_y(sr), rgb_to_y(hr)
    return psnr(ys, yh, shave), ssim(ys, yh, shave)
