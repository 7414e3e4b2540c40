"""k-space artifacts: Gibbs ringing, spikes and rigid motion."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial.transform import Rotation

from ..volume import Volume

__all__ = [
    "draw_gibbs",
    "apply_gibbs",
    "gibbs",
    "draw_spike",
    "apply_spike",
    "spike",
    "draw_motion",
    "apply_motion",
    "motion",
    "rigid_resample",
]


def _radius(shape) -> np.ndarray:
    """Normalized radial frequency in [0, 1] on the unshifted FFT grid."""
    freqs = [np.abs(np.fft.fftfreq(n)) / 0.5 for n in shape]
    grids = np.meshgrid(*freqs, indexing="ij", sparse=True)
    return np.sqrt(sum(g * g for g in grids)) / np.sqrt(3.0)


def draw_gibbs(rng, shape, alpha_range=(0.0, 1.0)) -> dict:
    return {"alpha": float(rng.uniform(*alpha_range))}


def apply_gibbs(arr, params) -> np.ndarray:
    alpha = params["alpha"]
    if alpha <= 0:
        return np.array(arr, dtype=np.float64)
    spec = np.fft.fftn(arr)
    spec[_radius(arr.shape) > 1.0 - alpha] = 0
    return np.fft.ifftn(spec).real


def gibbs(v: Volume, rng, alpha_range=(0.0, 1.0)) -> Volume:
    """Truncate the outer ``alpha`` fraction of k-space (by normalized radius)."""
    return v.with_data(apply_gibbs(v.data.astype(np.float64), draw_gibbs(rng, v.geometry.dims, alpha_range)))


def draw_spike(rng, shape, num_spikes=1, intensity_range=(1.0, 3.0)) -> dict:
    coords = []
    while len(coords) < num_spikes:
        k = [int(rng.integers(0, n)) for n in shape]
        if any(k):
            coords.append(k)
    intensities = [float(rng.uniform(*intensity_range)) for _ in range(num_spikes)]
    return {"coords": coords, "intensities": intensities}


def spiked_spectrum(arr, params) -> np.ndarray:
    """Spectrum after adding each spike at k and its conjugate partner -k."""
    spec = np.fft.fftn(arr)
    peak = float(np.abs(spec).max())
    shape = arr.shape
    out = spec.copy()
    for k, inten in zip(params["coords"], params["intensities"]):
        k = tuple(int(c) % n for c, n in zip(k, shape))
        mirror = tuple((-c) % n for c, n in zip(k, shape))
        out[k] += inten * peak
        if mirror != k:
            out[mirror] += inten * peak
    return out


def apply_spike(arr, params) -> np.ndarray:
    return np.fft.ifftn(spiked_spectrum(arr, params)).real


def spike(v: Volume, rng, num_spikes=1, intensity_range=(1.0, 3.0)) -> Volume:
    """Add ``num_spikes`` k-space spikes of magnitude ``intensity * max|spectrum|``."""
    params = draw_spike(rng, v.geometry.dims, num_spikes, intensity_range)
    return v.with_data(apply_spike(v.data.astype(np.float64), params))


def rigid_resample(arr, spacing, angles_deg, translation_mm, order=1) -> np.ndarray:
    """Rotate about the grid centre and translate (mm), sampling with ``order`` interpolation."""
    s = np.asarray(spacing, dtype=np.float64)
    rot = Rotation.from_euler("xyz", angles_deg, degrees=True).as_matrix()
    centre = (np.asarray(arr.shape, dtype=np.float64) - 1.0) / 2.0
    # out(x) = in(T^-1 x) with T the world-space rigid motion
    inv = (rot.T * s[None, :]) / s[:, None]
    offset = centre - inv @ centre - (rot.T @ np.asarray(translation_mm, dtype=np.float64)) / s
    return ndimage.affine_transform(arr, inv, offset=offset, order=order, mode="constant", cval=0.0)


def draw_motion(rng, shape, degrees=10.0, translation_mm=10.0, num_movements=1, axis=None) -> dict:
    m = int(num_movements)
    angles = rng.uniform(-degrees, degrees, size=(m, 3))
    trans = rng.uniform(-translation_mm, translation_mm, size=(m, 3))
    times = np.sort(rng.uniform(0.0, 1.0, size=m))
    if axis is None:
        axis = int(rng.integers(0, 3))
    return {
        "angles_deg": angles.tolist(),
        "translations_mm": trans.tolist(),
        "times": times.tolist(),
        "axis": int(axis),
    }


def apply_motion(arr, params, spacing=(1.0, 1.0, 1.0)) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    axis = params["axis"]
    n = arr.shape[axis]
    frames = [arr] + [
        rigid_resample(arr, spacing, a, t) for a, t in zip(params["angles_deg"], params["translations_mm"])
    ]
    bounds = [0] + [int(round(t * n)) for t in params["times"]] + [n]
    spectra = [np.fft.fftshift(np.fft.fftn(f)) for f in frames]
    out = np.empty_like(spectra[0])
    for i, spec in enumerate(spectra):
        sl = [slice(None)] * 3
        sl[axis] = slice(bounds[i], bounds[i + 1])
        out[tuple(sl)] = spec[tuple(sl)]
    return np.fft.ifftn(np.fft.ifftshift(out)).real


def motion(v: Volume, rng, degrees=10.0, translation_mm=10.0, num_movements=1, axis=None) -> Volume:
    """Simulate ``num_movements`` rigid movements during acquisition.

    Each movement's k-space lines along ``axis`` come from a rigidly moved copy.
    """
    params = draw_motion(rng, v.geometry.dims, degrees, translation_mm, num_movements, axis)
    return v.with_data(apply_motion(v.data, params, v.geometry.spacing))
