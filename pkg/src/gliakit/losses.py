"""Forward evaluation of the composite segmentation loss.

Dice, focal, bounding-box and rotational-inertia terms over a probability
map and a ground-truth label map. Diagnostics only; no gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .volume import check_same_geometry

__all__ = [
    "LossWeights",
    "dice_loss",
    "focal_loss",
    "bbox_loss",
    "inertia_loss",
    "total_loss",
    "inertia_tensor",
]

_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    w_dice: float = 1.0
    w_focal: float = 1.0
    w_bbox: float = 0.1
    w_inertia: float = 0.1
    focal_gamma: float = 2.0
    epsilon: float = 1e-5

    def __post_init__(self):
        ws = (self.w_dice, self.w_focal, self.w_bbox, self.w_inertia)
        if any(w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ValueError("loss weights must be non-negative with at least one positive")
        if self.focal_gamma < 0 or self.epsilon <= 0:
            raise ValueError("focal_gamma must be >= 0 and epsilon > 0")


def _onehot(pred, gt):
    check_same_geometry(pred, gt)
    present = np.unique(gt.data)
    missing = set(int(x) for x in present) - set(pred.channels)
    if missing:
        raise ValidationError(f"ground-truth labels {sorted(missing)} have no prediction channel")
    return np.stack([gt.data == c for c in pred.channels]).astype(np.float64)


def _foreground(pred):
    return [i for i, c in enumerate(pred.channels) if c != 0]


def dice_loss(pred, gt, epsilon: float = 1e-5) -> float:
    """1 - mean soft Dice over foreground channels."""
    g = _onehot(pred, gt)
    p = pred.data.astype(np.float64)
    scores = []
    for c in _foreground(pred):
        inter = float((p[c] * g[c]).sum())
        scores.append((2.0 * inter + epsilon) / (float(p[c].sum()) + float(g[c].sum()) + epsilon))
    if not scores:
        raise ValidationError("prediction has no foreground channel")
    return 1.0 - float(np.mean(scores))


def focal_loss(pred, gt, gamma: float = 2.0) -> float:
    """Mean of -(1 - p_t)^gamma log p_t over voxels."""
    if not pred.normalized:
        raise ValidationError("focal loss needs a normalized probability map")
    g = _onehot(pred, gt)
    p = pred.data.astype(np.float64)
    total = p.sum(axis=0)
    if np.any(np.abs(total - 1.0) > 1e-4):
        raise ValidationError("probability channels do not sum to 1")
    pt = np.clip((p * g).sum(axis=0), _CLAMP, 1.0 - _CLAMP)
    return float(np.mean(-((1.0 - pt) ** gamma) * np.log(pt)))


def _box(mask):
    idx = np.argwhere(mask)
    if idx.size == 0:
        return None
    return np.concatenate([idx.min(axis=0), idx.max(axis=0)]).astype(np.float64)


def bbox_loss(pred, gt, threshold: float = 0.5) -> float:
    """Mean normalized L1 distance between bounding-box coordinates, per class.

    A class empty in both gives 0, empty in exactly one gives 1.
    """
    g = _onehot(pred, gt)
    dims = np.array(pred.geometry.dims * 2, dtype=np.float64)
    per_class = []
    for c in _foreground(pred):
        bp = _box(pred.data[c] >= threshold)
        bg = _box(g[c] > 0)
        if bp is None and bg is None:
            per_class.append(0.0)
        elif bp is None or bg is None:
            per_class.append(1.0)
        else:
            per_class.append(float(np.mean(np.abs(bp - bg) / dims)))
    return float(np.mean(per_class)) if per_class else 0.0


def inertia_tensor(density: np.ndarray, spacing=(1.0, 1.0, 1.0)):
    """Mass-normalized second central moment tensor (3x3) of a density grid, in mm^2.

    Returns ``(tensor, mass)``; the tensor is None when the mass is zero.
    """
    density = np.asarray(density, dtype=np.float64)
    mass = float(density.sum())
    if mass <= 0:
        return None, 0.0
    coords = [np.arange(n, dtype=np.float64) * s for n, s in zip(density.shape, spacing)]
    marg = [density.sum(axis=tuple(a for a in range(3) if a != ax)) for ax in range(3)]
    centroid = np.array([(m * x).sum() / mass for m, x in zip(marg, coords)])
    centered = [x - c for x, c in zip(coords, centroid)]
    grids = np.meshgrid(*centered, indexing="ij", sparse=True)
    tensor = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            tensor[i, j] = tensor[j, i] = float((density * grids[i] * grids[j]).sum()) / mass
    return tensor, mass


def inertia_loss(pred, gt, epsilon: float = 1e-5) -> float:
    """Mean relative Frobenius distance between predicted and true inertia tensors."""
    g = _onehot(pred, gt)
    spacing = pred.geometry.spacing
    per_class = []
    for c in _foreground(pred):
        ip, mp = inertia_tensor(pred.data[c], spacing)
        ig, mg = inertia_tensor(g[c], spacing)
        if ip is None and ig is None:
            per_class.append(0.0)
        elif ip is None or ig is None:
            per_class.append(1.0)
        else:
            per_class.append(float(np.linalg.norm(ip - ig) / (np.linalg.norm(ig) + epsilon)))
    return float(np.mean(per_class)) if per_class else 0.0


def total_loss(pred, gt, weights: LossWeights | None = None):
    """Weighted sum of the four terms; returns ``(total, breakdown)``."""
    w = weights or LossWeights()
    terms = {
        "dice": dice_loss(pred, gt, w.epsilon),
        "focal": focal_loss(pred, gt, w.focal_gamma),
        "bbox": bbox_loss(pred, gt),
        "inertia": inertia_loss(pred, gt, w.epsilon),
    }
    total = (
        w.w_dice * terms["dice"]
        + w.w_focal * terms["focal"]
        + w.w_bbox * terms["bbox"]
        + w.w_inertia * terms["inertia"]
    )
    return total, terms
