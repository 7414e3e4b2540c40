"""Run the ten-transform augmentation pipeline with every gate forced open.

Each transform draws from its own counter-based stream keyed by
(master seed, case id, transform index), so rerunning a case reproduces it
bit for bit no matter how cases are scheduled.
"""

import numpy as np

from gliakit.augment import apply_pipeline, default_config
from gliakit.phantom import generate, random_spec

vol, lab, _ = generate(random_spec(2, dims=(48, 48, 48)))
cfg = default_config(probability=1.0, master_seed=2024)

record = []
(out,), out_lab = apply_pipeline([vol], lab, cfg, "case-001", record)
for r in record:
    keys = ", ".join(sorted(r["params"])) if r["params"] else "-"
    print(f"{r['kind']:16s} fired={r['fired']!s:5s} params: {keys}")

(again,), _ = apply_pipeline([vol], lab, cfg, "case-001")
print("rerun identical:", np.array_equal(out.data, again.data))
print("labels before/after:", sorted(np.unique(lab.data)), sorted(np.unique(out_lab.data)))
