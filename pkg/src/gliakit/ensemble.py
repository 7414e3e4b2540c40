"""Fuse several predictions into one label map, by vote or by probability mean."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .labels import ET, NETC, RC, SNFH
from .volume import LabelMap, ProbMap, check_same_geometry

__all__ = ["FusionConfig", "vote", "prob_mean", "DEFAULT_TIE_PRIORITY"]

DEFAULT_TIE_PRIORITY = (ET, NETC, SNFH, RC, 0)


@dataclass(frozen=True)
class FusionConfig:
    mode: str = "majority_vote"
    tie_priority: tuple[int, ...] = DEFAULT_TIE_PRIORITY
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in ("majority_vote", "prob_mean"):
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        object.__setattr__(self, "tie_priority", tuple(int(x) for x in self.tie_priority))
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(x < 0 or not np.isfinite(x) for x in w) or sum(w) <= 0:
                raise ValueError("weights must be finite, non-negative and not all zero")
            object.__setattr__(self, "weights", w)


def _priority_for(labels: Sequence[int], cfg: FusionConfig) -> list[int]:
    """Tie order restricted to ``labels``; labels missing from the priority list go last."""
    present = set(labels)
    order = [lab for lab in cfg.tie_priority if lab in present]
    order += sorted(present - set(order))
    return order


def _weights(n: int, cfg: FusionConfig) -> np.ndarray:
    if cfg.weights is None:
        return np.ones(n)
    if len(cfg.weights) != n:
        raise ValidationError(f"{len(cfg.weights)} weights given for {n} inputs")
    return np.asarray(cfg.weights, dtype=np.float64)


def _pick(scores: np.ndarray, candidates: list[int], order: list[int]) -> np.ndarray:
    """Per-voxel argmax of ``scores`` (one row per candidate) with ties broken by ``order``."""
    rank = [candidates.index(lab) for lab in order]
    ranked = scores[rank]
    best = np.argmax(ranked, axis=0)  # first maximum = highest priority
    return np.asarray(order, dtype=np.uint8)[best]


def vote(inputs: Sequence[LabelMap], cfg: FusionConfig | None = None) -> LabelMap:
    """Weighted plurality label per voxel."""
    cfg = cfg or FusionConfig()
    if len(inputs) < 2:
        raise ValidationError("vote needs at least two inputs")
    check_same_geometry(*inputs)
    schema = inputs[0].schema
    if any(m.schema != schema for m in inputs[1:]):
        raise ValidationError("inputs use different label schemas")
    w = _weights(len(inputs), cfg)
    candidates = sorted(schema.labels)
    scores = np.zeros((len(candidates), *inputs[0].geometry.dims))
    for m, wi in zip(inputs, w):
        for c, lab in enumerate(candidates):
            scores[c] += wi * (m.data == lab)
    return LabelMap(inputs[0].geometry, _pick(scores, candidates, _priority_for(candidates, cfg)), schema)


def prob_mean(inputs: Sequence[ProbMap], cfg: FusionConfig | None = None, schema=None) -> LabelMap:
    """Argmax of the weighted mean probability vector per voxel."""
    cfg = cfg or FusionConfig(mode="prob_mean")
    if len(inputs) < 2:
        raise ValidationError("prob_mean needs at least two inputs")
    check_same_geometry(*inputs)
    channels = inputs[0].channels
    if any(p.channels != channels for p in inputs[1:]):
        raise ValidationError("inputs disagree on channel order")
    w = _weights(len(inputs), cfg)
    # sort the weighted terms per element before summing so the floating-point
    # result (and hence argmax ties) cannot depend on input order
    terms = np.stack([wi * p.data.astype(np.float64) for p, wi in zip(inputs, w)])
    acc = np.sort(terms, axis=0).sum(axis=0) / w.sum()
    candidates = list(channels)
    fused = _pick(acc, candidates, _priority_for(candidates, cfg))
    return LabelMap(inputs[0].geometry, fused, schema)
