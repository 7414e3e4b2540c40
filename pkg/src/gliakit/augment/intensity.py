"""Intensity-only transforms: noise, smoothing, scaling and bias field."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..volume import Volume
from .rng import subkey_stream

__all__ = [
    "draw_gaussian_noise",
    "apply_gaussian_noise",
    "gaussian_noise",
    "draw_gaussian_smooth",
    "apply_gaussian_smooth",
    "gaussian_smooth",
    "draw_intensity_scale",
    "apply_intensity_scale",
    "intensity_scale",
    "draw_bias_field",
    "apply_bias_field",
    "bias_field",
    "bias_polynomial",
    "monomial_exponents",
]


def draw_gaussian_noise(rng, shape, std_range=(0.0, 0.1)) -> dict:
    return {"std_fraction": float(rng.uniform(*std_range)), "noise_key": int(rng.integers(0, 2**63))}


def apply_gaussian_noise(arr, params, channel: int = 0) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    std = params["std_fraction"] * float(arr.max() - arr.min())
    if std == 0:
        return arr.copy()
    noise = subkey_stream(params["noise_key"], channel).normal(0.0, std, size=arr.shape)
    return arr + noise


def gaussian_noise(v: Volume, rng, std_range=(0.0, 0.1)) -> Volume:
    """Additive zero-mean noise; std is a fraction of the intensity range."""
    return v.with_data(apply_gaussian_noise(v.data, draw_gaussian_noise(rng, v.geometry.dims, std_range)))


def draw_gaussian_smooth(rng, shape, sigma_range=(0.5, 1.5)) -> dict:
    return {"sigma": [float(rng.uniform(*sigma_range)) for _ in range(3)]}


def apply_gaussian_smooth(arr, params) -> np.ndarray:
    return ndimage.gaussian_filter(np.asarray(arr, dtype=np.float64), params["sigma"], mode="reflect")


def gaussian_smooth(v: Volume, rng, sigma_range=(0.5, 1.5)) -> Volume:
    return v.with_data(apply_gaussian_smooth(v.data, draw_gaussian_smooth(rng, v.geometry.dims, sigma_range)))


def draw_intensity_scale(rng, shape, factor_range=(0.9, 1.1)) -> dict:
    return {"factor": float(rng.uniform(*factor_range))}


def apply_intensity_scale(arr, params) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) * params["factor"]


def intensity_scale(v: Volume, rng, factor_range=(0.9, 1.1)) -> Volume:
    return v.with_data(apply_intensity_scale(v.data, draw_intensity_scale(rng, v.geometry.dims, factor_range)))


def monomial_exponents(order: int):
    """(i, j, k) with i + j + k <= order, in lexicographic order."""
    return [
        (i, j, k)
        for i in range(order + 1)
        for j in range(order + 1 - i)
        for k in range(order + 1 - i - j)
    ]


def draw_bias_field(rng, shape, coefficient=0.5, order=3) -> dict:
    n = len(monomial_exponents(order))
    return {"order": int(order), "coefficients": rng.uniform(-coefficient, coefficient, size=n).tolist()}


def _unit_coords(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)


def bias_polynomial(shape, params) -> np.ndarray:
    """Log bias field: the polynomial over coordinates normalized to [-1, 1]."""
    x, y, z = (_unit_coords(n) for n in shape)
    poly = np.zeros(shape)
    for (i, j, k), c in zip(monomial_exponents(params["order"]), params["coefficients"]):
        poly += c * (x[:, None, None] ** i) * (y[None, :, None] ** j) * (z[None, None, :] ** k)
    return poly


def apply_bias_field(arr, params) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) * np.exp(bias_polynomial(arr.shape, params))


def bias_field(v: Volume, rng, coefficient=0.5, order=3) -> Volume:
    """Multiply by exp(p) with p a random polynomial of the given order."""
    return v.with_data(apply_bias_field(v.data, draw_bias_field(rng, v.geometry.dims, coefficient, order)))
