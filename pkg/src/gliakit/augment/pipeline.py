"""Probability-gated augmentation pipeline and its JSON configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..volume import LabelMap, Volume, check_same_geometry
from . import intensity, kspace, spatial
from .rng import stream

__all__ = ["TransformSpec", "AugmentConfig", "KINDS", "apply_pipeline", "default_config"]


@dataclass(frozen=True)
class _Kind:
    draw: Callable
    apply: Callable
    defaults: dict
    spatial: bool = False
    needs_spacing: bool = False
    per_channel: bool = False


KINDS = {
    "gibbs": _Kind(kspace.draw_gibbs, kspace.apply_gibbs, {"alpha_range": (0.0, 1.0)}),
    "gaussian_noise": _Kind(
        intensity.draw_gaussian_noise, intensity.apply_gaussian_noise, {"std_range": (0.0, 0.1)}, per_channel=True
    ),
    "gaussian_smooth": _Kind(
        intensity.draw_gaussian_smooth, intensity.apply_gaussian_smooth, {"sigma_range": (0.5, 1.5)}
    ),
    "intensity_scale": _Kind(
        intensity.draw_intensity_scale, intensity.apply_intensity_scale, {"factor_range": (0.9, 1.1)}
    ),
    "flip": _Kind(spatial.draw_flip, spatial.apply_flip, {"axis_probability": 0.5}, spatial=True),
    "motion": _Kind(
        kspace.draw_motion,
        kspace.apply_motion,
        {"degrees": 10.0, "translation_mm": 10.0, "num_movements": 1, "axis": None},
        needs_spacing=True,
    ),
    "spike": _Kind(kspace.draw_spike, kspace.apply_spike, {"num_spikes": 1, "intensity_range": (1.0, 3.0)}),
    "bias_field": _Kind(intensity.draw_bias_field, intensity.apply_bias_field, {"coefficient": 0.5, "order": 3}),
    "elastic": _Kind(
        spatial.draw_elastic,
        spatial.apply_elastic,
        {"control_points": 7, "max_displacement_voxels": 7.5},
        spatial=True,
    ),
    "anisotropy": _Kind(
        spatial.draw_anisotropy,
        spatial.apply_anisotropy,
        {"downsample_range": (1.0, 2.0), "axes": (0, 1, 2)},
        spatial=True,
    ),
}

DEFAULT_ORDER = (
    "gibbs",
    "gaussian_noise",
    "gaussian_smooth",
    "intensity_scale",
    "flip",
    "motion",
    "spike",
    "bias_field",
    "elastic",
    "anisotropy",
)


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    probability: float = 0.1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        unknown = set(self.params) - set(KINDS[self.kind].defaults)
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged = dict(KINDS[self.kind].defaults)
        merged.update(self.params)
        for key, val in merged.items():
            if isinstance(val, list):
                merged[key] = tuple(val)
            if key.endswith("_range") and (len(merged[key]) != 2 or merged[key][0] > merged[key][1]):
                raise ValueError(f"{self.kind}.{key} must be an increasing (low, high) pair")
        object.__setattr__(self, "params", merged)


@dataclass(frozen=True)
class AugmentConfig:
    transforms: tuple[TransformSpec, ...]
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))

    @classmethod
    def from_dict(cls, doc: dict, master_seed: int | None = None) -> "AugmentConfig":
        specs = [
            TransformSpec(t["kind"], float(t.get("probability", 0.1)), dict(t.get("params", {})))
            for t in doc["transforms"]
        ]
        seed = doc.get("master_seed", 0) if master_seed is None else master_seed
        return cls(tuple(specs), int(seed))

    @classmethod
    def from_json(cls, path, master_seed: int | None = None) -> "AugmentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), master_seed)

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "transforms": [
                {"kind": t.kind, "probability": t.probability, "params": _jsonable(t.params)}
                for t in self.transforms
            ],
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def default_config(probability: float = 0.1, master_seed: int = 0) -> AugmentConfig:
    """All ten transforms, each gated at ``probability``."""
    return AugmentConfig(tuple(TransformSpec(k, probability) for k in DEFAULT_ORDER), master_seed)


def apply_pipeline(vols, labels: LabelMap | None, cfg: AugmentConfig, case_id, record: list | None = None):
    """Run the gated transforms in order on every channel of one case.

    Each transform gets its own keyed stream: one uniform for the gate, then
    its parameters. Spatial transforms move the labels too (nearest
    neighbour); intensity transforms leave them untouched. When ``record``
    is a list, one entry per transform is appended describing what fired.
    """
    vols = list(vols)
    if not vols:
        raise ValueError("apply_pipeline needs at least one volume")
    check_same_geometry(*vols, *([labels] if labels is not None else []))
    geom = vols[0].geometry
    arrays = [v.data.astype(np.float64) for v in vols]
    lab = None if labels is None else np.array(labels.data)

    for index, spec in enumerate(cfg.transforms):
        kind = KINDS[spec.kind]
        rng = stream(cfg.master_seed, case_id, index)
        gate = float(rng.uniform())
        fired = gate < spec.probability
        params = None
        if fired:
            params = kind.draw(rng, geom.dims, **spec.params)
            if kind.spatial:
                arrays = [kind.apply(a, params, False) for a in arrays]
                if lab is not None:
                    lab = kind.apply(lab, params, True)
            elif kind.needs_spacing:
                arrays = [kind.apply(a, params, geom.spacing) for a in arrays]
            elif kind.per_channel:
                arrays = [kind.apply(a, params, c) for c, a in enumerate(arrays)]
            else:
                arrays = [kind.apply(a, params) for a in arrays]
        if record is not None:
            record.append({"index": index, "kind": spec.kind, "gate": gate, "fired": fired, "params": params})

    out_vols = [Volume(geom, a) for a in arrays]
    out_labels = None if labels is None else LabelMap(geom, lab, labels.schema)
    return out_vols, out_labels
