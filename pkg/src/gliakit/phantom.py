"""Synthetic labeled ellipsoid phantoms and controlled perturbations.

Used as ground truth throughout the test suite: every lesion is an
ellipsoid, so voxel counts, centroids and moments are known exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .augment.rng import stream
from .labels import AGPT, ET, get_schema
from .morphology import connected_components, dilate, surface_voxels
from .volume import Geometry, LabelMap, Volume

__all__ = [
    "Lesion",
    "PhantomSpec",
    "PhantomTruth",
    "generate",
    "perturb",
    "apply_perturbations",
    "random_spec",
]

DEFAULT_INTENSITY = {0: 0.0, 1: 0.4, 2: 0.6, 3: 0.9, 4: 0.1}


@dataclass(frozen=True)
class Lesion:
    center: tuple[float, float, float]  # voxel coordinates
    semi_axes_mm: tuple[float, float, float]
    label: int
    intensity: float | None = None


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    lesions: tuple[Lesion, ...] = ()
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    noise_std: float = 0.0
    background_intensity: float = 0.0
    seed: int = 0
    schema: object = AGPT

    def __post_init__(self):
        object.__setattr__(self, "lesions", tuple(self.lesions))
        for les in self.lesions:
            if les.label not in self.schema.labels or les.label == 0:
                raise ValueError(f"lesion label {les.label} not a foreground label of {self.schema.name}")

    @classmethod
    def from_dict(cls, doc: dict) -> "PhantomSpec":
        lesions = tuple(
            Lesion(tuple(l["center"]), tuple(l["semi_axes_mm"]), int(l["label"]), l.get("intensity"))
            for l in doc.get("lesions", [])
        )
        return cls(
            dims=tuple(doc["dims"]),
            lesions=lesions,
            spacing=tuple(doc.get("spacing", (1.0, 1.0, 1.0))),
            noise_std=float(doc.get("noise_std", 0.0)),
            background_intensity=float(doc.get("background_intensity", 0.0)),
            seed=int(doc.get("seed", 0)),
            schema=get_schema(doc.get("schema", "agpt")),
        )


@dataclass(frozen=True)
class PhantomTruth:
    voxel_counts: tuple[int, ...]
    centroids: tuple[tuple[float, float, float] | None, ...]
    label_counts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "voxel_counts": list(self.voxel_counts),
                "centroids": [list(c) if c is not None else None for c in self.centroids],
                "label_counts": {str(k): v for k, v in self.label_counts.items()},
            },
            indent=2,
            sort_keys=True,
        )


def _ellipsoid_box(les: Lesion, spacing, dims):
    lo, hi = [], []
    for c, a, s, n in zip(les.center, les.semi_axes_mm, spacing, dims):
        r = a / s
        if c - r < -0.5 or c + r > n - 0.5:
            raise ValueError(f"lesion at {les.center} with semi-axes {les.semi_axes_mm} mm leaves the grid")
        lo.append(max(int(np.floor(c - r)), 0))
        hi.append(min(int(np.ceil(c + r)) + 1, n))
    return tuple(slice(a, b) for a, b in zip(lo, hi))


def generate(spec: PhantomSpec):
    """Voxelize the lesions (later ones overwrite earlier) and add noise.

    Returns ``(volume, labels, truth)``.
    """
    dims = tuple(int(d) for d in spec.dims)
    geom = Geometry(dims, spec.spacing)
    owner = np.full(dims, -1, dtype=np.int32)
    for n, les in enumerate(spec.lesions):
        box = _ellipsoid_box(les, spec.spacing, dims)
        grids = np.meshgrid(*[np.arange(s.start, s.stop) for s in box], indexing="ij", sparse=True)
        q = sum(((g - c) * s / a) ** 2 for g, c, s, a in zip(grids, les.center, spec.spacing, les.semi_axes_mm))
        owner[box][q <= 1.0] = n

    labels = np.zeros(dims, dtype=np.uint8)
    image = np.full(dims, spec.background_intensity, dtype=np.float64)
    counts, centroids = [], []
    for n, les in enumerate(spec.lesions):
        inside = owner == n
        labels[inside] = les.label
        image[inside] = les.intensity if les.intensity is not None else DEFAULT_INTENSITY.get(les.label, 1.0)
        idx = np.argwhere(inside)
        counts.append(int(len(idx)))
        centroids.append(tuple(float(x) for x in idx.mean(axis=0)) if len(idx) else None)
    if spec.noise_std > 0:
        image = image + stream(spec.seed, "phantom-noise", 0).normal(0.0, spec.noise_std, size=dims)
    tally = np.bincount(labels.ravel(), minlength=256)
    truth = PhantomTruth(
        tuple(counts),
        tuple(centroids),
        {int(k): int(tally[k]) for k in sorted(spec.schema.labels) if k},
    )
    return Volume(geom, image), LabelMap(geom, labels, spec.schema), truth


def random_spec(seed: int, dims=(32, 32, 32), n_lesions=(1, 4), labels=(1, 2, 3), max_semi_axis=5.0,
                noise_std=0.05) -> PhantomSpec:
    """Random but reproducible phantom with a few small ellipsoids."""
    rng = stream(seed, "random-spec", 0)
    lesions = []
    for _ in range(int(rng.integers(n_lesions[0], n_lesions[1] + 1))):
        axes = tuple(float(x) for x in rng.uniform(1.5, max_semi_axis, size=3))
        center = tuple(float(rng.uniform(a + 0.5, d - a - 1.5)) for a, d in zip(axes, dims))
        lesions.append(Lesion(center, axes, int(rng.choice(labels))))
    return PhantomSpec(tuple(dims), tuple(lesions), noise_std=noise_std, seed=seed)


def perturb(labels: LabelMap, kind: str, rng, **kw):
    """Apply one controlled perturbation; returns ``(labels, record)``.

    Kinds:
      ``erode_surface``: clear the 6-neighbourhood surface of the foreground
        (or of ``label`` only).
      ``drop_lesion``: clear one 26-connected foreground component (``index``
        picks it, 0-based in raster order; random otherwise).
      ``add_fp_blob``: paint a ``size``^3 cube of ``label`` (default ET) at a
        random spot at least ``clearance`` voxels (Chebyshev) from any foreground.
    """
    data = labels.data.copy()
    fg = data > 0
    if kind == "erode_surface":
        target = fg if kw.get("label") is None else data == kw["label"]
        surf = surface_voxels(target)
        data[surf] = 0
        return labels.with_data(data), {"kind": kind, "removed_voxels": int(surf.sum())}
    if kind == "drop_lesion":
        cc = connected_components(fg, 26)
        if cc.count == 0:
            return labels, {"kind": kind, "dropped": None, "removed_voxels": 0}
        index = kw.get("index")
        if index is None:
            index = int(rng.integers(0, cc.count))
        gone = cc.component_id == index + 1
        data[gone] = 0
        return labels.with_data(data), {"kind": kind, "dropped": int(index), "removed_voxels": int(gone.sum())}
    if kind == "add_fp_blob":
        size = int(kw.get("size", 3))
        lab = int(kw.get("label", ET))
        clearance = int(kw.get("clearance", 4))
        forbidden = dilate(fg, clearance) if fg.any() else fg
        free = np.argwhere(~forbidden)
        dims = np.array(data.shape)
        free = free[np.all(free + size <= dims, axis=1)]
        rng_order = rng.permutation(len(free))
        for i in rng_order:
            corner = free[i]
            box = tuple(slice(int(c), int(c) + size) for c in corner)
            if not forbidden[box].any():
                data[box] = lab
                return labels.with_data(data), {
                    "kind": kind,
                    "corner": [int(c) for c in corner],
                    "size": size,
                    "label": lab,
                    "added_voxels": size**3,
                }
        raise ValueError("no free location for the false-positive blob")
    raise ValueError(f"unknown perturbation {kind!r}")


def apply_perturbations(labels: LabelMap, kinds, rng):
    """Apply a list of perturbation kinds (or (kind, kwargs) pairs) in order."""
    records = []
    for item in kinds:
        kind, kw = (item, {}) if isinstance(item, str) else item
        labels, rec = perturb(labels, kind, rng, **kw)
        records.append(rec)
    return labels, records
