"""Geometry-aware containers for 3D volumes, label maps and probability maps.

All containers are immutable: the payload array is copied on construction and
marked read-only, so instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import GeometryMismatchError, ValidationError

if TYPE_CHECKING:
    from .labels import LabelSchema

__all__ = [
    "Geometry",
    "Volume",
    "LabelMap",
    "ProbMap",
    "check_same_geometry",
    "fft3",
    "ifft3",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Geometry:
    """Voxel grid size, spacing in mm and the voxel-to-world affine."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValidationError(f"dims must be three positive integers, got {self.dims}")
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise ValidationError(f"spacing must be three positive finite values, got {self.spacing}")
        if self.affine is None:
            affine = np.diag([*spacing, 1.0])
        else:
            affine = np.array(self.affine, dtype=np.float64)
            if affine.shape != (4, 4):
                raise ValidationError("affine must be 4x4")
            if not np.array_equal(affine[3], [0.0, 0.0, 0.0, 1.0]):
                raise ValidationError("affine last row must be (0, 0, 0, 1)")
            norms = np.linalg.norm(affine[:3, :3], axis=0)
            if not np.allclose(norms, spacing, rtol=1e-4, atol=0.0):
                raise ValidationError(
                    f"affine column norms {tuple(norms)} disagree with spacing {spacing}"
                )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", _readonly(affine))

    def __eq__(self, other):
        if not isinstance(other, Geometry):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and np.array_equal(self.affine, other.affine)
        )

    def __hash__(self):
        return hash((self.dims, self.spacing, self.affine.tobytes()))

    @property
    def n_voxels(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def voxel_volume(self) -> float:
        """Volume of one voxel in mm^3."""
        return self.spacing[0] * self.spacing[1] * self.spacing[2]


def check_same_geometry(*items) -> Geometry:
    """Return the shared geometry of ``items`` or raise if any differs.

    Dims and spacing must match exactly; nothing is ever resampled.
    """
    geoms = [it.geometry if hasattr(it, "geometry") else it for it in items]
    first = geoms[0]
    for g in geoms[1:]:
        if g.dims != first.dims or g.spacing != first.spacing:
            raise GeometryMismatchError(
                f"geometry mismatch: dims {first.dims} vs {g.dims}, "
                f"spacing {first.spacing} vs {g.spacing}"
            )
    return first


def _check_shape(data: np.ndarray, dims: Sequence[int]) -> None:
    if data.shape != tuple(dims):
        raise ValidationError(f"data shape {data.shape} does not match dims {tuple(dims)}")


@dataclass(frozen=True, eq=False)
class Volume:
    """Real-valued scalar grid (float32) on a :class:`Geometry`."""

    geometry: Geometry
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, order="C")
        _check_shape(data, self.geometry.dims)
        bad = ~np.isfinite(data)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValidationError(f"non-finite intensity at voxel {idx}")
        object.__setattr__(self, "data", _readonly(data))

    @classmethod
    def from_array(cls, data, spacing=(1.0, 1.0, 1.0), affine=None) -> "Volume":
        data = np.asarray(data)
        return cls(Geometry(data.shape, spacing, affine), data)

    def with_data(self, data) -> "Volume":
        return Volume(self.geometry, data)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Integer label grid (uint8) validated against a label schema."""

    geometry: Geometry
    data: np.ndarray
    schema: LabelSchema | None = None

    def __post_init__(self):
        from .labels import AGPT, LabelSchema

        schema = AGPT if self.schema is None else self.schema
        if not isinstance(schema, LabelSchema):
            raise TypeError("schema must be a LabelSchema")
        raw = np.asarray(self.data)
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise ValidationError("label data must be integral")
        if raw.size and (raw.min() < 0 or raw.max() > 255):
            raise ValidationError("label values must fit in 0..255")
        data = np.array(raw, dtype=np.uint8, order="C")
        _check_shape(data, self.geometry.dims)
        allowed = np.zeros(256, dtype=bool)
        allowed[list(schema.labels)] = True
        bad = ~allowed[data]
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValidationError(
                f"label {int(data[idx])} at voxel {idx} is not in schema {schema.name} "
                f"{sorted(schema.labels)}"
            )
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "data", _readonly(data))

    @classmethod
    def from_array(cls, data, schema=None, spacing=(1.0, 1.0, 1.0), affine=None) -> "LabelMap":
        data = np.asarray(data)
        return cls(Geometry(data.shape, spacing, affine), data, schema)

    def with_data(self, data) -> "LabelMap":
        return LabelMap(self.geometry, data, self.schema)


@dataclass(frozen=True, eq=False)
class ProbMap:
    """Per-class probability stack with shape ``(n_channels, nx, ny, nz)``.

    ``channels`` lists the label integer each channel scores. Values are
    clamped to [0, 1]; with ``normalized=True`` the per-voxel channel sum
    must be 1 within 1e-4.
    """

    geometry: Geometry
    channels: tuple[int, ...]
    data: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        channels = tuple(int(c) for c in self.channels)
        if len(set(channels)) != len(channels):
            raise ValidationError(f"duplicate channels {channels}")
        data = np.array(self.data, dtype=np.float32, order="C")
        if data.shape != (len(channels), *self.geometry.dims):
            raise ValidationError(
                f"prob data shape {data.shape} does not match "
                f"{(len(channels), *self.geometry.dims)}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("non-finite probability")
        np.clip(data, 0.0, 1.0, out=data)
        if self.normalized:
            total = data.sum(axis=0, dtype=np.float64)
            if np.any(np.abs(total - 1.0) > 1e-4):
                idx = tuple(int(i) for i in np.argwhere(np.abs(total - 1.0) > 1e-4)[0])
                raise ValidationError(f"channel sum {total[idx]:.6f} at voxel {idx} is not 1")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", _readonly(data))

    @classmethod
    def from_labels(cls, labels: LabelMap, channels=None) -> "ProbMap":
        """One-hot encode a label map."""
        channels = tuple(sorted(labels.schema.labels)) if channels is None else tuple(channels)
        data = np.stack([labels.data == c for c in channels]).astype(np.float32)
        return cls(labels.geometry, channels, data)

    def argmax_labels(self) -> np.ndarray:
        idx = np.argmax(self.data, axis=0)
        return np.asarray(self.channels, dtype=np.uint8)[idx]


def fft3(v) -> np.ndarray:
    """Unnormalized forward 3D DFT of a volume (or plain array)."""
    data = v.data if isinstance(v, Volume) else np.asarray(v)
    return np.fft.fftn(data.astype(np.float64, copy=False), axes=(0, 1, 2))


def ifft3(spectrum: np.ndarray, geometry: Geometry | None = None):
    """Inverse 3D DFT carrying the 1/N factor.

    Returns the real part wrapped in a :class:`Volume` when ``geometry`` is
    given, otherwise the complex array.
    """
    out = np.fft.ifftn(spectrum, axes=(0, 1, 2))
    if geometry is None:
        return out
    return Volume(geometry, out.real)
