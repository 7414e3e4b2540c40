"""Probability-gated MRI augmentation: basic transforms plus k-space and spatial artifacts."""

from .intensity import bias_field, gaussian_noise, gaussian_smooth, intensity_scale
from .kspace import gibbs, motion, spike
from .pipeline import KINDS, AugmentConfig, TransformSpec, apply_pipeline, default_config
from .rng import stream
from .spatial import anisotropy, elastic, flip

__all__ = [
    "AugmentConfig",
    "TransformSpec",
    "KINDS",
    "apply_pipeline",
    "default_config",
    "stream",
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
]
