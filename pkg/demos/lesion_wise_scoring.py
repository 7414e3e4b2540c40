"""Score a perturbed phantom against its ground truth.

Classic Dice/HD95 barely move when a small lesion is missed or a spurious
blob appears; the lesion-wise scores drop sharply because every unmatched
lesion costs a full penalty.
"""

import numpy as np

from gliakit.labels import ET, SNFH
from gliakit.metrics_seg import evaluate_case
from gliakit.phantom import Lesion, PhantomSpec, generate, perturb

spec = PhantomSpec(
    (64, 64, 48),
    (
        Lesion((30, 30, 24), (12, 10, 8), SNFH),
        Lesion((30, 31, 24), (6, 5, 4), ET),
        Lesion((52, 50, 12), (2.5, 2.5, 2.5), ET),  # small satellite lesion
    ),
)
_, gt, truth = generate(spec)
print("ground-truth voxels per lesion:", truth.voxel_counts)

rng = np.random.default_rng(0)
for kind, kw in (("erode_surface", {}), ("drop_lesion", {}), ("add_fp_blob", {"size": 3})):
    pred, rec = perturb(gt, kind, rng, **kw)
    et = evaluate_case(gt, pred)["ET"]
    print(
        f"{kind:14s} ET dice {et.dice:.3f} hd95 {et.hd95:6.2f} | "
        f"lesion-wise dice {et.lw_dice:.3f} hd95 {et.lw_hd95:7.2f} "
        f"(TP {et.n_tp}, FN {et.n_fn}, FP {et.n_fp})"
    )
