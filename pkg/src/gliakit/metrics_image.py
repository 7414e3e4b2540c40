"""Image fidelity metrics for inpainting: MSE, PSNR and SSIM.

SSIM uses a 3D Gaussian window (size 11, sigma 1.5 by default) and is
evaluated only at voxels whose full window lies inside the grid. A mask
restricts which of those voxels enter the average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, ValidationError
from .volume import check_same_geometry

__all__ = ["ImageMetricConfig", "mse", "psnr", "ssim", "ssim_map", "gaussian_window"]


@dataclass(frozen=True)
class ImageMetricConfig:
    data_range: float | None = None
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    slice_mode: bool = False  # 2D windows in the (x, y) plane, averaged over all slices

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError("window_size must be a positive odd integer")
        if self.sigma <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("sigma, k1 and k2 must be positive")
        if self.data_range is not None and not self.data_range > 0:
            raise ValueError("data_range must be positive")


def _arrays(ref, pred, mask):
    check_same_geometry(ref, pred)
    a = ref.data.astype(np.float64)
    b = pred.data.astype(np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape:
            raise ValidationError(f"mask shape {mask.shape} does not match volume {a.shape}")
        if not mask.any():
            raise EmptyMaskError("metric mask is empty")
    return a, b, mask


def mse(ref, pred, mask=None) -> float:
    """Mean squared difference over the mask (or all voxels)."""
    a, b, mask = _arrays(ref, pred, mask)
    diff = (a - b) ** 2
    return float(diff[mask].mean() if mask is not None else diff.mean())


def _data_range(ref, cfg) -> float:
    if cfg.data_range is not None:
        return float(cfg.data_range)
    lo, hi = float(ref.data.min()), float(ref.data.max())
    if hi <= lo:
        raise ValidationError("reference volume is constant; pass data_range explicitly")
    return hi - lo


def psnr(ref, pred, cfg: ImageMetricConfig | None = None, mask=None) -> float:
    """10 log10(L^2 / MSE) in dB; ``inf`` when the volumes agree exactly."""
    cfg = cfg or ImageMetricConfig()
    err = mse(ref, pred, mask)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(_data_range(ref, cfg) ** 2 / err)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 1D Gaussian taps."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(x, taps, axes):
    half = (len(taps) - 1) // 2
    for ax in axes:
        x = ndimage.correlate1d(x, taps, axis=ax, mode="constant", cval=0.0)
    crop = [slice(None)] * x.ndim
    for ax in axes:
        crop[ax] = slice(half, x.shape[ax] - half)
    return x[tuple(crop)]


def ssim_map(ref, pred, cfg: ImageMetricConfig | None = None) -> np.ndarray:
    """Local SSIM at every voxel whose window fits entirely inside the grid."""
    cfg = cfg or ImageMetricConfig()
    a, b, _ = _arrays(ref, pred, None)
    axes = (0, 1) if cfg.slice_mode else (0, 1, 2)
    for ax in axes:
        if a.shape[ax] < cfg.window_size:
            raise ValidationError(
                f"volume extent {a.shape[ax]} along axis {ax} is smaller than the "
                f"{cfg.window_size}-voxel window; use a smaller window_size"
            )
    L = _data_range(ref, cfg)
    c1 = (cfg.k1 * L) ** 2
    c2 = (cfg.k2 * L) ** 2
    taps = gaussian_window(cfg.window_size, cfg.sigma)
    mu_a = _filter_valid(a, taps, axes)
    mu_b = _filter_valid(b, taps, axes)
    var_a = _filter_valid(a * a, taps, axes) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps, axes) - mu_b * mu_b
    cov = _filter_valid(a * b, taps, axes) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(ref, pred, cfg: ImageMetricConfig | None = None, mask=None) -> float:
    """Mean local SSIM, optionally restricted to window centres inside ``mask``."""
    cfg = cfg or ImageMetricConfig()
    local = ssim_map(ref, pred, cfg)
    if mask is None:
        return float(local.mean())
    _, _, mask = _arrays(ref, pred, mask)
    half = (cfg.window_size - 1) // 2
    axes = (0, 1) if cfg.slice_mode else (0, 1, 2)
    crop = [slice(None)] * 3
    for ax in axes:
        crop[ax] = slice(half, mask.shape[ax] - half)
    inner = mask[tuple(crop)]
    if not inner.any():
        raise EmptyMaskError("mask has no voxel far enough from the border for a full SSIM window")
    return float(local[inner].mean())
