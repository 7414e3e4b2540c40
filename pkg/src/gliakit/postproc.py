"""Adaptive post-processing: dust removal with neighbourhood relabeling,
followed by volume-ratio relabeling rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .labels import ET, NETC, SNFH, extract_region, region_volumes
from .morphology import connected_components

__all__ = ["PostprocConfig", "remove_dust", "ratio_relabel", "postprocess"]

_OFFSETS = np.array(
    [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) != (0, 0, 0)]
)


@dataclass(frozen=True)
class PostprocConfig:
    dust_min_voxels: int = 50
    dust_regions: tuple[str, ...] = ("ET", "TC", "WT")
    et_wt_threshold: float = 0.03
    snfh_wt_trigger: float = 1.0
    connectivity: int = 26
    et_rule: bool = True
    snfh_rule: bool = True

    def __post_init__(self):
        object.__setattr__(self, "dust_regions", tuple(self.dust_regions))
        if self.dust_min_voxels < 0:
            raise ValueError("dust_min_voxels must be >= 0")
        for name in ("et_wt_threshold", "snfh_wt_trigger"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def disabled(cls) -> "PostprocConfig":
        return cls(dust_min_voxels=0, et_rule=False, snfh_rule=False)


def _neighbourhood_mode(data, comp_ids, cid, voxels):
    """Majority label around each voxel, ignoring the component itself.

    Ties go to the smaller label; an empty neighbourhood yields background.
    """
    shape = np.array(data.shape)
    out = np.empty(len(voxels), dtype=np.uint8)
    for n, v in enumerate(voxels):
        nb = v + _OFFSETS
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        nb = nb[ok]
        idx = tuple(nb.T)
        keep = comp_ids[idx] != cid
        if not keep.any():
            out[n] = 0
            continue
        votes = np.bincount(data[idx][keep], minlength=256)
        out[n] = int(np.argmax(votes))  # argmax returns the first (smallest) label on ties
    return out


def remove_dust(labels, cfg: PostprocConfig | None = None):
    """Relabel components smaller than ``dust_min_voxels`` in each dust region.

    Regions are processed in the configured order; each stage sees the
    relabeling of the previous one. Single pass, no fixpoint iteration.
    """
    cfg = cfg or PostprocConfig()
    if cfg.dust_min_voxels == 0:
        return labels
    data = labels.data.copy()
    current = labels
    for region in cfg.dust_regions:
        mask = extract_region(current, region)
        cc = connected_components(mask, cfg.connectivity)
        small = [i + 1 for i, s in enumerate(cc.sizes) if s < cfg.dust_min_voxels]
        if not small:
            continue
        snapshot = current.data
        objs = ndimage.find_objects(cc.component_id, max_label=cc.count)
        for cid in small:
            sl = objs[cid - 1]
            lo = [max(s.start - 1, 0) for s in sl]
            hi = [min(s.stop + 1, n) for s, n in zip(sl, data.shape)]
            box = tuple(slice(a, b) for a, b in zip(lo, hi))
            local_ids = cc.component_id[box]
            voxels = np.argwhere(local_ids == cid)
            new = _neighbourhood_mode(snapshot[box], local_ids, cid, voxels)
            data[box][tuple(voxels.T)] = new
        current = labels.with_data(data)
    return current


def ratio_relabel(labels, cfg: PostprocConfig | None = None):
    """ET->NETC when 0 < ET/WT < threshold; SNFH->NETC when SNFH/WT reaches the trigger.

    Both rules read the volumes computed once on the input map.
    """
    cfg = cfg or PostprocConfig()
    vols = region_volumes(labels)
    data = labels.data
    et_fire = cfg.et_rule and 0.0 < vols.et_wt < cfg.et_wt_threshold
    snfh_fire = cfg.snfh_rule and vols.counts["WT"] > 0 and vols.snfh_wt >= cfg.snfh_wt_trigger - 1e-9
    if not (et_fire or snfh_fire):
        return labels
    out = data.copy()
    if et_fire:
        out[data == ET] = NETC
    if snfh_fire:
        out[data == SNFH] = NETC
    return labels.with_data(out)


def postprocess(labels, cfg: PostprocConfig | None = None):
    """Dust removal, then ratio relabeling."""
    cfg = cfg or PostprocConfig()
    return ratio_relabel(remove_dust(labels, cfg), cfg)
