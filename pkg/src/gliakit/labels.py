"""BraTS label schemas, composite regions and region volume bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

__all__ = [
    "LabelSchema",
    "RegionVolumes",
    "AGPT",
    "PRE_TREATMENT",
    "get_schema",
    "extract_region",
    "region_volumes",
]

BACKGROUND = 0
NETC = 1
SNFH = 2
ET = 3
RC = 4


@dataclass(frozen=True)
class LabelSchema:
    name: str
    classes: Mapping[int, str]
    composites: Mapping[str, frozenset]

    def __post_init__(self):
        object.__setattr__(self, "classes", MappingProxyType(dict(self.classes)))
        object.__setattr__(
            self,
            "composites",
            MappingProxyType({k: frozenset(v) for k, v in self.composites.items()}),
        )

    def __hash__(self):
        return hash(self.name)

    def __eq__(self, other):
        if not isinstance(other, LabelSchema):
            return NotImplemented
        return (
            self.name == other.name
            and dict(self.classes) == dict(other.classes)
            and dict(self.composites) == dict(other.composites)
        )

    @property
    def labels(self) -> frozenset:
        return frozenset(self.classes)

    def label_of(self, class_name: str) -> int:
        for k, v in self.classes.items():
            if v == class_name:
                return k
        raise KeyError(class_name)

    @property
    def regions(self) -> tuple[str, ...]:
        return tuple(self.composites)


AGPT = LabelSchema(
    name="AGPT",
    classes={BACKGROUND: "background", NETC: "NETC", SNFH: "SNFH", ET: "ET", RC: "RC"},
    composites={
        "ET": {ET},
        "TC": {ET, NETC},
        "WT": {ET, NETC, SNFH},
        "RC": {RC},
    },
)

PRE_TREATMENT = LabelSchema(
    name="PRE_TREATMENT",
    classes={BACKGROUND: "background", NETC: "NETC", SNFH: "SNFH", ET: "ET"},
    composites={
        "ET": {ET},
        "TC": {ET, NETC},
        "WT": {ET, NETC, SNFH},
    },
)

_SCHEMAS = {"agpt": AGPT, "pre": PRE_TREATMENT, "pre_treatment": PRE_TREATMENT}


def get_schema(name: str) -> LabelSchema:
    """Look up a schema by its CLI name (``agpt`` or ``pre``)."""
    try:
        return _SCHEMAS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown schema {name!r}; choose agpt or pre") from None


def region_labels(schema: LabelSchema, region: str) -> frozenset:
    """Label set of a composite region, or of a single named foreground class."""
    if region in schema.composites:
        return schema.composites[region]
    for k, name in schema.classes.items():
        if k != BACKGROUND and name == region:
            return frozenset({k})
    known = list(schema.regions) + [n for k, n in schema.classes.items() if k and n not in schema.composites]
    raise ValueError(f"region {region!r} is not declared in schema {schema.name} (known: {', '.join(known)})")


def extract_region(labels, region: str) -> np.ndarray:
    """Boolean mask of voxels whose label belongs to ``region``."""
    members = region_labels(labels.schema, region)
    lut = np.zeros(256, dtype=bool)
    lut[list(members)] = True
    return lut[labels.data]


@dataclass(frozen=True)
class RegionVolumes:
    counts: Mapping[str, int]
    volumes_mm3: Mapping[str, float]
    et_wt: float
    snfh_wt: float


def region_volumes(labels) -> RegionVolumes:
    """Voxel counts, mm^3 volumes and the ET/WT and SNFH/WT ratios.

    Ratios are 0 when WT is empty.
    """
    tally = np.bincount(labels.data.ravel(), minlength=256)
    per_label = {
        "ET": int(tally[ET]),
        "NETC": int(tally[NETC]),
        "SNFH": int(tally[SNFH]),
        "RC": int(tally[RC]) if RC in labels.schema.labels else 0,
    }
    counts = dict(per_label)
    counts["TC"] = per_label["ET"] + per_label["NETC"]
    counts["WT"] = counts["TC"] + per_label["SNFH"]
    vv = labels.geometry.voxel_volume
    wt = counts["WT"]
    return RegionVolumes(
        counts=MappingProxyType(counts),
        volumes_mm3=MappingProxyType({k: c * vv for k, c in counts.items()}),
        et_wt=counts["ET"] / wt if wt else 0.0,
        snfh_wt=counts["SNFH"] / wt if wt else 0.0,
    )
