"""Classic and lesion-wise Dice / HD95 for segmentation regions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, GeometryMismatchError, ValidationError
from .labels import extract_region
from .morphology import connected_components, dilate, edt, surface_voxels
from .volume import check_same_geometry

__all__ = [
    "LesionWiseConfig",
    "LesionMatch",
    "RegionReport",
    "SegReport",
    "dice",
    "hd95",
    "surface_distances",
    "lesion_wise",
    "evaluate_case",
]


@dataclass(frozen=True)
class LesionWiseConfig:
    dilation_radius_voxels: int = 3
    min_gt_lesion_voxels: int = 10
    fp_fn_hd95_penalty_mm: float = 374.0
    connectivity: int = 26

    def __post_init__(self):
        if self.dilation_radius_voxels < 0:
            raise ValueError("dilation_radius_voxels must be >= 0")
        if self.min_gt_lesion_voxels < 0:
            raise ValueError("min_gt_lesion_voxels must be >= 0")
        if not self.fp_fn_hd95_penalty_mm >= 0:
            raise ValueError("fp_fn_hd95_penalty_mm must be >= 0")
        if self.connectivity not in (6, 18, 26):
            raise ValueError("connectivity must be 6, 18 or 26")


@dataclass(frozen=True)
class LesionMatch:
    status: str  # "TP", "FN" or "FP"
    dice: float
    hd95_mm: float
    gt_lesion_id: int | None = None
    gt_member_ids: tuple[int, ...] = ()
    matched_pred_component_ids: frozenset = frozenset()
    gt_voxels: int = 0
    pred_voxels: int = 0

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "gt_lesion_id": self.gt_lesion_id,
            "gt_member_ids": list(self.gt_member_ids),
            "matched_pred_component_ids": sorted(int(i) for i in self.matched_pred_component_ids),
            "dice": self.dice,
            "hd95_mm": self.hd95_mm,
            "gt_voxels": self.gt_voxels,
            "pred_voxels": self.pred_voxels,
        }


@dataclass(frozen=True)
class RegionReport:
    region: str
    dice: float
    hd95: float
    lw_dice: float
    lw_hd95: float
    matches: tuple[LesionMatch, ...] = field(default=(), repr=False)

    def count(self, status: str) -> int:
        return sum(m.status == status for m in self.matches)

    @property
    def n_tp(self) -> int:
        return self.count("TP")

    @property
    def n_fn(self) -> int:
        return self.count("FN")

    @property
    def n_fp(self) -> int:
        return self.count("FP")


@dataclass(frozen=True)
class SegReport:
    case_id: str
    regions: dict

    def __getitem__(self, region) -> RegionReport:
        return self.regions[region]


def _pair(gt, pred):
    gt = np.asarray(gt, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    if gt.shape != pred.shape:
        raise GeometryMismatchError(f"mask shapes differ: {gt.shape} vs {pred.shape}")
    return gt, pred


def dice(gt, pred) -> float:
    """2|A & B| / (|A| + |B|); 1.0 when both masks are empty."""
    gt, pred = _pair(gt, pred)
    total = int(np.count_nonzero(gt)) + int(np.count_nonzero(pred))
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(gt & pred)) / total


def _crop_box(*masks, margin=1):
    any_fg = np.zeros(masks[0].shape, dtype=bool)
    for m in masks:
        any_fg |= m
    idx = np.argwhere(any_fg)
    lo = np.maximum(idx.min(axis=0) - margin, 0)
    hi = np.minimum(idx.max(axis=0) + margin + 1, masks[0].shape)
    return tuple(slice(a, b) for a, b in zip(lo, hi))


def surface_distances(gt, pred, spacing=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Union of both directed surface-to-surface distance sets, in mm.

    The gt-to-pred distances come first, followed by pred-to-gt.
    """
    gt, pred = _pair(gt, pred)
    if not gt.any() or not pred.any():
        raise EmptyMaskError("surface distances need two non-empty masks")
    # a one-voxel background margin keeps surfaces identical inside the crop
    box = _crop_box(gt, pred)
    sg = surface_voxels(gt[box])
    sp = surface_voxels(pred[box])
    d_gp = edt(sp, spacing)[sg]
    d_pg = edt(sg, spacing)[sp]
    return np.concatenate([d_gp, d_pg])


def hd95(gt, pred, spacing=(1.0, 1.0, 1.0)) -> float:
    """95th percentile (linear interpolation) of symmetric surface distances in mm."""
    return float(np.percentile(surface_distances(gt, pred, spacing), 95))


def _classic_hd95(gt, pred, spacing) -> float:
    if not gt.any() or not pred.any():
        return math.nan
    return hd95(gt, pred, spacing)


def _lesion_units(gt_mask, cfg):
    """Component-label the GT, drop small lesions, merge lesions with overlapping dilations.

    Returns the GT labeling, kept ids, unit membership lists and one dilated
    footprint (as (box, mask)) per kept lesion.
    """
    cc = connected_components(gt_mask, cfg.connectivity)
    keep = [i + 1 for i, s in enumerate(cc.sizes) if s >= cfg.min_gt_lesion_voxels]
    if not keep:
        return cc, [], {}
    r = cfg.dilation_radius_voxels
    shape = gt_mask.shape
    objs = _find_objects(cc.component_id, cc.count)
    footprints = {}
    for cid in keep:
        sl = objs[cid - 1]
        lo = [max(s.start - r, 0) for s in sl]
        hi = [min(s.stop + r, n) for s, n in zip(sl, shape)]
        box = tuple(slice(a, b) for a, b in zip(lo, hi))
        local = cc.component_id[box] == cid
        if r > 0:
            local = dilate(local, r)
        footprints[cid] = (box, local)

    parent = {cid: cid for cid in keep}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, a in enumerate(keep):
        box_a, fa = footprints[a]
        for b in keep[i + 1 :]:
            box_b, fb = footprints[b]
            inter = _box_intersection(box_a, box_b)
            if inter is None:
                continue
            sa = _sub(fa, box_a, inter)
            sb = _sub(fb, box_b, inter)
            if np.any(sa & sb):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    units: dict[int, list[int]] = {}
    for cid in keep:
        units.setdefault(find(cid), []).append(cid)
    return cc, [units[k] for k in sorted(units)], footprints


def _find_objects(ids, count):
    return ndimage.find_objects(ids, max_label=count)


def _box_intersection(a, b):
    out = []
    for sa, sb in zip(a, b):
        lo, hi = max(sa.start, sb.start), min(sa.stop, sb.stop)
        if lo >= hi:
            return None
        out.append(slice(lo, hi))
    return tuple(out)


def _sub(local, box, inter):
    return local[tuple(slice(i.start - b.start, i.stop - b.start) for i, b in zip(inter, box))]


def lesion_wise(gt_labels, pred_labels, region: str, cfg: LesionWiseConfig | None = None):
    """Lesion-wise Dice and HD95 for one region.

    Returns ``(lw_dice, lw_hd95, matches)``; every GT lesion unit and every
    unmatched predicted component carries equal weight in the means.
    """
    cfg = cfg or LesionWiseConfig()
    check_same_geometry(gt_labels, pred_labels)
    if gt_labels.schema != pred_labels.schema:
        raise ValidationError("gt and prediction use different label schemas")
    gt_mask = extract_region(gt_labels, region)
    pred_mask = extract_region(pred_labels, region)
    return _lesion_wise_masks(gt_mask, pred_mask, gt_labels.geometry.spacing, cfg)


def _lesion_wise_masks(gt_mask, pred_mask, spacing, cfg):
    penalty = float(cfg.fp_fn_hd95_penalty_mm)
    gt_cc, units, footprints = _lesion_units(gt_mask, cfg)
    pred_cc = connected_components(pred_mask, cfg.connectivity)
    pred_ids = pred_cc.component_id
    pred_objs = _find_objects(pred_ids, pred_cc.count) if pred_cc.count else []

    matches = []
    assigned: set[int] = set()
    for members in units:
        hit: set[int] = set()
        for cid in members:
            box, local = footprints[cid]
            under = pred_ids[box][local]
            hit.update(int(i) for i in np.unique(under) if i)
        boxes = [footprints[cid][0] for cid in members] + [pred_objs[pid - 1] for pid in hit]
        box = _union_box(boxes, gt_mask.shape, margin=1)
        g = np.isin(gt_cc.component_id[box], members)
        n_gt = int(np.count_nonzero(g))
        if not hit:
            matches.append(
                LesionMatch("FN", 0.0, penalty, members[0], tuple(members), frozenset(), n_gt, 0)
            )
            continue
        assigned |= hit
        p = np.isin(pred_ids[box], sorted(hit))
        matches.append(
            LesionMatch(
                "TP",
                dice(g, p),
                hd95(g, p, spacing),
                members[0],
                tuple(members),
                frozenset(hit),
                n_gt,
                int(np.count_nonzero(p)),
            )
        )

    for pid in range(1, pred_cc.count + 1):
        if pid not in assigned:
            matches.append(
                LesionMatch("FP", 0.0, penalty, None, (), frozenset({pid}), 0, int(pred_cc.sizes[pid - 1]))
            )

    if not matches:
        return 1.0, 0.0, ()
    lw_dice = float(np.mean([m.dice for m in matches]))
    lw_hd95 = float(np.mean([m.hd95_mm for m in matches]))
    return lw_dice, lw_hd95, tuple(matches)


def _union_box(boxes, shape, margin=0):
    return tuple(
        slice(max(min(b[ax].start for b in boxes) - margin, 0),
              min(max(b[ax].stop for b in boxes) + margin, shape[ax]))
        for ax in range(3)
    )


def evaluate_case(gt, pred, regions=("WT", "TC", "ET"), cfg: LesionWiseConfig | None = None,
                  case_id: str = "") -> SegReport:
    """Classic and lesion-wise metrics for every region in ``regions``."""
    cfg = cfg or LesionWiseConfig()
    check_same_geometry(gt, pred)
    if gt.schema != pred.schema:
        raise ValidationError("gt and prediction use different label schemas")
    spacing = gt.geometry.spacing
    out = {}
    for region in regions:
        g = extract_region(gt, region)
        p = extract_region(pred, region)
        lw_d, lw_h, matches = _lesion_wise_masks(g, p, spacing, cfg)
        out[region] = RegionReport(region, dice(g, p), _classic_hd95(g, p, spacing), lw_d, lw_h, matches)
    return SegReport(case_id, out)
