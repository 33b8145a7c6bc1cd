"""PSNR and SSIM between a reference image and a restored estimate.

Both metrics run on the real-valued samples, before any 8-bit
quantization, so they measure the solver output rather than the file
writer. PSNR is reported on the usual 0-255 scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate2d

from .image import Image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class QualityReport:
    """psnr_db is math.inf for identical images; per_channel is None for gray."""

    psnr_db: float
    ssim: float
    per_channel: tuple = None


def _samples(img) -> np.ndarray:
    arr = img.data if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected image samples, got shape {arr.shape}")
    return np.asarray(arr, dtype=np.float64)


def _pair(a, b):
    x = _samples(a)
    y = _samples(b)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def psnr(a, b) -> float:
    """10 log10(255^2 / MSE) with the MSE taken over all samples at 0-255 scale.

    Identical inputs return math.inf rather than raising on the zero MSE.
    """
    x, y = _pair(a, b)
    if np.array_equal(x, y):
        return math.inf
    diff = (x - y) * 255.0
    mse = float(np.mean(diff * diff))
    return 10.0 * math.log10(255.0 * 255.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    # Identical code paths for x and y keep ssim(x, x) at exactly 1.0:
    # the numerator and denominator come out bitwise equal.
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mu1 = correlate2d(x, window, mode="valid")
    mu2 = correlate2d(y, window, mode="valid")
    s11 = correlate2d(x * x, window, mode="valid") - mu1 * mu1
    s22 = correlate2d(y * y, window, mode="valid") - mu2 * mu2
    s12 = correlate2d(x * y, window, mode="valid") - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Mean local SSIM, 11x11 Gaussian window with sigma 1.5, dynamic range 1.

    Windows are fully interior (no padding). Color images score as the
    mean of the per-channel values.
    """
    x, y = _pair(a, b)
    h, w = x.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(
            f"image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    scores = [_ssim_plane(x[:, :, c], y[:, :, c], window) for c in range(x.shape[2])]
    return float(np.mean(scores))


def report(a, b) -> QualityReport:
    """Joint PSNR/SSIM, with a per-channel breakdown for color inputs."""
    x, y = _pair(a, b)
    per_channel = None
    if x.shape[2] > 1:
        per_channel = tuple(
            (psnr(x[:, :, c], y[:, :, c]), ssim(x[:, :, c], y[:, :, c]))
            for c in range(x.shape[2])
        )
    return QualityReport(psnr_db=psnr(x, y), ssim=ssim(x, y), per_channel=per_channel)
