"""Spatial transforms applied jointly to intensities and labels.

Intensities use linear interpolation, labels nearest neighbour; samples
falling outside the grid become 0 (background).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..volume import LabelMap, Volume

__all__ = [
    "draw_flip",
    "apply_flip",
    "flip",
    "draw_elastic",
    "dense_displacement",
    "apply_elastic",
    "elastic",
    "draw_anisotropy",
    "apply_anisotropy",
    "anisotropy",
]


def draw_flip(rng, shape, axis_probability=0.5) -> dict:
    return {"axes": [ax for ax in range(3) if rng.uniform() < axis_probability]}


def apply_flip(arr, params, is_label=False) -> np.ndarray:
    axes = tuple(params["axes"])
    return np.flip(arr, axis=axes).copy() if axes else np.array(arr)


def _joint(v, labels, fn, params):
    out_v = v.with_data(fn(v.data.astype(np.float64), params, False))
    if labels is None:
        return out_v, None
    return out_v, labels.with_data(fn(labels.data, params, True))


def flip(v: Volume, labels: LabelMap | None, rng, axis_probability=0.5):
    return _joint(v, labels, apply_flip, draw_flip(rng, v.geometry.dims, axis_probability))


def draw_elastic(rng, shape, control_points=7, max_displacement_voxels=7.5) -> dict:
    cp = int(control_points)
    if cp < 4:
        raise ValueError("control_points must be >= 4")
    grid = rng.uniform(-max_displacement_voxels, max_displacement_voxels, size=(3, cp, cp, cp))
    grid[:, 0] = grid[:, -1] = 0
    grid[:, :, 0] = grid[:, :, -1] = 0
    grid[:, :, :, 0] = grid[:, :, :, -1] = 0
    return {"control_grid": grid.tolist()}


def dense_displacement(shape, params) -> np.ndarray:
    """Trilinear upsampling of the control grid to a (3, nx, ny, nz) displacement field."""
    grid = np.asarray(params["control_grid"], dtype=np.float64)
    cp = grid.shape[1:]
    axes = [np.linspace(0, c - 1, n) if n > 1 else np.array([(c - 1) / 2.0]) for c, n in zip(cp, shape)]
    coords = np.meshgrid(*axes, indexing="ij")
    return np.stack([ndimage.map_coordinates(g, coords, order=1, mode="nearest") for g in grid])


def apply_elastic(arr, params, is_label=False) -> np.ndarray:
    disp = dense_displacement(arr.shape, params)
    idx = np.indices(arr.shape, dtype=np.float64)
    order = 0 if is_label else 1
    src = np.asarray(arr) if is_label else np.asarray(arr, dtype=np.float64)
    return ndimage.map_coordinates(src, idx + disp, order=order, mode="constant", cval=0)


def elastic(v: Volume, labels: LabelMap | None, rng, control_points=7, max_displacement_voxels=7.5):
    """Dense elastic warp from a random control grid with a fixed (zero) border."""
    return _joint(v, labels, apply_elastic, draw_elastic(rng, v.geometry.dims, control_points, max_displacement_voxels))


def draw_anisotropy(rng, shape, downsample_range=(1.0, 2.0), axes=(0, 1, 2)) -> dict:
    axis = int(axes[int(rng.integers(0, len(axes)))])
    return {"axis": axis, "factor": float(rng.uniform(*downsample_range))}


def _resample_axis(arr, axis, positions, order):
    coords = np.indices(arr.shape[:axis] + (len(positions),) + arr.shape[axis + 1 :], dtype=np.float64)
    shape = [1, 1, 1]
    shape[axis] = len(positions)
    coords[axis] = np.broadcast_to(np.asarray(positions).reshape(shape), coords[axis].shape)
    return ndimage.map_coordinates(arr, coords, order=order, mode="nearest")


def apply_anisotropy(arr, params, is_label=False) -> np.ndarray:
    axis, f = params["axis"], params["factor"]
    n = arr.shape[axis]
    m = max(1, int(round(n / f)))
    order = 0 if is_label else 1
    src = np.asarray(arr) if is_label else np.asarray(arr, dtype=np.float64)
    if m == n or n == 1:
        return src.copy()
    down_pos = np.linspace(0.0, n - 1.0, m) if m > 1 else np.array([(n - 1) / 2.0])
    low = _resample_axis(src, axis, down_pos, order)
    up_pos = np.linspace(0.0, m - 1.0, n) if m > 1 else np.zeros(n)
    return _resample_axis(low, axis, up_pos, order)


def anisotropy(v: Volume, labels: LabelMap | None, rng, downsample_range=(1.0, 2.0), axes=(0, 1, 2)):
    """Downsample one random axis by f ~ U(range) and upsample back to the original grid."""
    return _joint(v, labels, apply_anisotropy, draw_anisotropy(rng, v.geometry.dims, downsample_range, axes))
