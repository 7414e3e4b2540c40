"""Bit-stable CSV/JSON report writers and run manifests."""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

__all__ = [
    "fmt",
    "SEG_COLUMNS",
    "IMAGE_COLUMNS",
    "seg_rows",
    "seg_summary_rows",
    "write_csv",
    "lesion_json",
    "file_digest",
    "write_manifest",
]

SEG_COLUMNS = ("case_id", "region", "dice", "hd95", "lw_dice", "lw_hd95", "n_tp", "n_fn", "n_fp")
IMAGE_COLUMNS = ("case_id", "scope", "ssim", "psnr", "mse")
SUMMARY_ID = "mean"


def fmt(x) -> str:
    """Fixed six-decimal rendering with ``nan``/``inf`` tokens."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.6f}"
    return "0.000000" if out == "-0.000000" else out


def seg_rows(report) -> list[list]:
    rows = []
    for region, r in report.regions.items():
        rows.append([report.case_id, region, r.dice, r.hd95, r.lw_dice, r.lw_hd95, r.n_tp, r.n_fn, r.n_fp])
    return rows


def _nanmean(values):
    vals = [v for v in values if not math.isnan(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan


def seg_summary_rows(rows: list[list], regions) -> list[list]:
    out = []
    for region in regions:
        sel = [r for r in rows if r[1] == region]
        if not sel:
            continue
        out.append(
            [SUMMARY_ID, region]
            + [_nanmean([r[i] for r in sel]) for i in range(2, 6)]
            + [sum(r[i] for r in sel) for i in range(6, 9)]
        )
    return out


def write_csv(path, columns, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def lesion_json(reports) -> str:
    doc = {
        r.case_id: {region: [m.as_dict() for m in rr.matches] for region, rr in r.regions.items()}
        for r in reports
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _short(path) -> str:
    path = os.path.abspath(str(path))
    return "/".join([os.path.basename(os.path.dirname(path)), os.path.basename(path)])


def write_manifest(out_dir, command: str, config: dict, inputs, seed=None) -> str:
    """Write ``manifest.json`` describing a run into ``out_dir``."""
    from . import __version__

    doc = {
        "tool": "gliakit",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {_short(p): file_digest(p) for p in sorted(inputs, key=str)},
        "master_seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
