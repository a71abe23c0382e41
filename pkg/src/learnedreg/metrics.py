"""Image-quality metrics: MSE, PSNR and SSIM."""
import math

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / mse)`` in dB; ``math.inf`` for identical images."""
    return psnr_from_mse(mse(a, b), peak)


def psnr_from_mse(value: float, peak: float = 1.0) -> float:
    if not peak > 0:
        raise ValueError("peak must be positive")
    if value == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / value)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean SSIM over all fully-overlapping 11x11 Gaussian windows (sigma 1.5).

    Local statistics use population (biased) moments, the standard SSIM convention.
    """
    a, b = _pair(a, b)
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs 2-D images of at least {SSIM_WINDOW} pixels per side")
    w = _gaussian_window()

    def filt(x):
        return convolve2d(x, w, mode="valid")

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def evaluate(truth, recon) -> dict:
    """Per-image metrics over a stack; PSNR is taken from the mean MSE."""
    truth = np.asarray(truth, dtype=float)
    recon = np.asarray(recon, dtype=float)
    per_mse = np.mean((truth - recon) ** 2, axis=(-2, -1))
    mean_mse = float(np.mean(per_mse))
    return {
        "mse": mean_mse,
        "mse_stderr": float(np.std(per_mse, ddof=1) / np.sqrt(len(per_mse))) if len(per_mse) > 1 else 0.0,
        "psnr": psnr_from_mse(mean_mse),
        "ssim": float(np.mean([ssim(t, r) for t, r in zip(truth, recon)])),
        "per_image_mse": per_mse,
    }
