import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gliakit.labels import AGPT  # noqa: E402
from gliakit.volume import LabelMap, Volume  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def labelmap(arr, spacing=(1.0, 1.0, 1.0), schema=AGPT):
    return LabelMap.from_array(np.asarray(arr, dtype=np.uint8), schema, spacing)


def volume(arr, spacing=(1.0, 1.0, 1.0)):
    return Volume.from_array(np.asarray(arr, dtype=np.float64), spacing)


def cube(shape, lo, hi, value=1, dtype=np.uint8):
    a = np.zeros(shape, dtype=dtype)
    a[tuple(slice(l, h) for l, h in zip(lo, hi))] = value
    return a


def write_case_dirs(root, n_cases=4, seed=0, perturbations=("erode_surface", ("add_fp_blob", {"size": 3}))):
    """Write gt/ and pred/ directories of seeded phantom cases; returns their paths."""
    from gliakit.nifti import write_nifti
    from gliakit.phantom import apply_perturbations, generate, random_spec

    gt_dir, pred_dir = root / "gt", root / "pred"
    gt_dir.mkdir(exist_ok=True)
    pred_dir.mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_cases):
        _, gt, _ = generate(random_spec(seed * 1000 + i))
        pred, _ = apply_perturbations(gt, list(perturbations), rng)
        write_nifti(gt, gt_dir / f"case{i:03d}.nii.gz")
        write_nifti(pred, pred_dir / f"case{i:03d}.nii.gz")
    return gt_dir, pred_dir
