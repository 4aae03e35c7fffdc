"""Image-quality metrics: PSNR, SSIM, masked variants, geometric-average error.

SSIM uses the reference constants (K1=0.01, K2=0.03, 11x11 Gaussian window
with sigma=1.5), computed per channel and averaged.  Because a perceptual
metric is not available here, the geometric average is the two-factor mean
of (10^(-PSNR/10), sqrt(1-SSIM)) and reports itself as such so it is not
confused with three-factor averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

PSNR_CAP_DB = 99.0
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius 5 -> 11-tap window
SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _mask_flags(mask, shape):
    if mask is None:
        return np.ones(shape[:2], dtype=bool)
    mask = np.asarray(mask).astype(bool)
    if mask.shape != shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {shape[:2]}")
    if not mask.any():
        raise ValueError("mask excludes every pixel")
    return mask


def mse(a, b, mask=None) -> float:
    """Mean squared error over included pixels and channels."""
    a, b = _check_pair(a, b)
    m = _mask_flags(mask, a.shape)
    diff = (a - b)[m]
    return float(np.mean(diff**2))


def psnr(a, b, mask=None, cap: float = PSNR_CAP_DB) -> float:
    """-10 log10(MSE) for unit-range images; ``cap`` dB when MSE is zero."""
    err = mse(a, b, mask)
    if err == 0.0:
        return cap
    return float(-10.0 * np.log10(err))


def _ssim_map(a, b):
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    blur = lambda x: gaussian_filter(x, SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")
    mu_a = blur(a)
    mu_b = blur(b)
    var_a = blur(a * a) - mu_a**2
    var_b = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )


def ssim(a, b, mask=None) -> float:
    """Structural similarity in [-1, 1], per channel then averaged.

    Raises for images smaller than the 11x11 window.
    """
    a, b = _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    m = _mask_flags(mask, a.shape)
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    vals = [float(np.mean(_ssim_map(a[..., c], b[..., c])[m])) for c in range(a.shape[-1])]
    return float(np.mean(vals))


def average_error(psnr_db: float, ssim_val: float, lpips: float | None = None) -> float:
    """Geometric mean of (10^(-PSNR/10), sqrt(1-SSIM)[, LPIPS]).

    The perceptual factor is simply omitted from the product when not
    provided; reports should label the result accordingly.  Improving any
    input strictly decreases the output.
    """
    if not np.isfinite(psnr_db) or not np.isfinite(ssim_val):
        raise ValueError("metrics must be finite")
    if ssim_val > 1.0:
        raise ValueError("ssim cannot exceed 1")
    factors = [10.0 ** (-psnr_db / 10.0), np.sqrt(max(1.0 - ssim_val, 0.0))]
    if lpips is not None:
        factors.append(lpips)
    return float(np.prod(factors) ** (1.0 / len(factors)))


@dataclass
class MetricReport:
    """One evaluation record; ``average_label`` flags the missing perceptual term."""

    psnr: float
    ssim: float
    mse: float
    average_err: float
    masked: bool
    average_label: str = "avg(no-lpips)"


def evaluate_pair(pred, gt, mask=None) -> MetricReport:
    """All metrics for one rendered/reference image pair."""
    m = mse(pred, gt, mask)
    p = psnr(pred, gt, mask)
    s = ssim(pred, gt, mask)
    return MetricReport(psnr=p, ssim=s, mse=m,
                        average_err=average_error(p, s), masked=mask is not None)
