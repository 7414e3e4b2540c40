"""Command-line entry point: ``gliakit <command> ...``.

Commands: evaluate, postprocess, ensemble, augment, inpaint-eval, loss,
phantom, pipeline. Case files are paired across directories by filename
stem (text before the first ".").
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict
from functools import partial

from . import __version__
from .augment.pipeline import AugmentConfig, apply_pipeline
from .ensemble import FusionConfig, prob_mean, vote
from .errors import GliakitError
from .labels import get_schema
from .losses import LossWeights, total_loss
from .metrics_image import ImageMetricConfig, mse, psnr, ssim
from .metrics_seg import LesionWiseConfig, evaluate_case
from .nifti import read_nifti, read_probmap, write_nifti
from .phantom import PhantomSpec, generate
from .postproc import PostprocConfig, postprocess
from .reports import (
    IMAGE_COLUMNS,
    SEG_COLUMNS,
    fmt,
    lesion_json,
    seg_rows,
    seg_summary_rows,
    write_csv,
    write_manifest,
)

EXIT_OK = 0
EXIT_PARTIAL = 2
NIFTI_SUFFIXES = (".nii", ".nii.gz")


def case_stem(path) -> str:
    return os.path.basename(str(path)).split(".", 1)[0]


def list_cases(directory) -> dict:
    """Map case stem -> path for every NIfTI file in ``directory``."""
    if not os.path.isdir(directory):
        return {}
    out = {}
    for name in sorted(os.listdir(directory)):
        if name.endswith(NIFTI_SUFFIXES):
            out[case_stem(name)] = os.path.join(directory, name)
    return out


def read_pairs(path) -> list[tuple[str, str, str]]:
    """Explicit pairing file with columns case_id, gt, pred."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [(r["case_id"], r["gt"], r["pred"]) for r in csv.DictReader(fh)]


def n_threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("GLIAKIT_THREADS")
    return max(1, int(env)) if env else 1


def _map(fn, items, threads, processes=False):
    """Apply ``fn`` to every item, in order, with up to ``threads`` workers.

    ``processes=True`` uses worker processes for GIL-bound work; ``fn`` must
    then be picklable.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    executor = ProcessPoolExecutor if processes else ThreadPoolExecutor
    with executor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def _lw_config(args) -> LesionWiseConfig:
    if getattr(args, "lw_config", None):
        with open(args.lw_config, encoding="utf-8") as fh:
            return LesionWiseConfig(**json.load(fh))
    return LesionWiseConfig()


def _pp_config(args) -> PostprocConfig:
    doc = {}
    if getattr(args, "pp_config", None):
        with open(args.pp_config, encoding="utf-8") as fh:
            doc = json.load(fh)
    if args.dust is not None:
        doc["dust_min_voxels"] = args.dust
    if args.et_wt is not None:
        doc["et_wt_threshold"] = args.et_wt
    if args.snfh_wt is not None:
        doc["snfh_wt_trigger"] = args.snfh_wt
    if getattr(args, "no_ratio_rules", False):
        doc["et_rule"] = doc["snfh_rule"] = False
    return PostprocConfig(**doc)


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _evaluate_pair(item, schema_name, regions, cfg):
    case, g, p = item
    schema = get_schema(schema_name)
    return evaluate_case(read_nifti(g, schema), read_nifti(p, schema), regions, cfg, case)


def cmd_evaluate(args) -> int:
    get_schema(args.schema)  # fail fast on an unknown schema
    regions = [r.strip() for r in args.regions.split(",") if r.strip()]
    cfg = _lw_config(args)
    if args.pairs:
        pairs = read_pairs(args.pairs)
        unmatched = [c for c, g, p in pairs if not (os.path.exists(g) and os.path.exists(p))]
        pairs = [t for t in pairs if t[0] not in unmatched]
    else:
        gt, pred = list_cases(args.gt), list_cases(args.pred)
        unmatched = sorted(set(gt) ^ set(pred))
        pairs = [(c, gt[c], pred[c]) for c in sorted(set(gt) & set(pred))]

    run = partial(_evaluate_pair, schema_name=args.schema, regions=tuple(regions), cfg=cfg)
    reports = sorted(_map(run, pairs, n_threads(args), processes=True), key=lambda r: r.case_id)
    rows = [row for r in reports for row in seg_rows(r)]
    write_csv(args.out, SEG_COLUMNS, rows + seg_summary_rows(rows, regions))
    if args.lesion_json:
        with open(args.lesion_json, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(lesion_json(reports) + "\n")
    if unmatched or not pairs:
        print(f"unmatched cases: {', '.join(unmatched) if unmatched else '(no cases found)'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_postprocess(args) -> int:
    schema = get_schema(args.schema)
    cfg = _pp_config(args)
    if os.path.isdir(args.inp):
        cases = list_cases(args.inp)
        _ensure_dir(args.out)

        def run(path):
            write_nifti(postprocess(read_nifti(path, schema), cfg), os.path.join(args.out, os.path.basename(path)))

        _map(run, list(cases.values()), n_threads(args))
        write_manifest(args.out, "postprocess", _cfg_dict(cfg), list(cases.values()), args.seed)
    else:
        write_nifti(postprocess(read_nifti(args.inp, schema), cfg), args.out)
    return EXIT_OK


def _cfg_dict(cfg) -> dict:
    return json.loads(json.dumps(asdict(cfg), default=list))


def _fusion(args) -> FusionConfig:
    weights = tuple(float(w) for w in args.weights.split(",")) if args.weights else None
    mode = "majority_vote" if args.mode == "vote" else "prob_mean"
    return FusionConfig(mode=mode, weights=weights)


def cmd_ensemble(args) -> int:
    schema = get_schema(args.schema)
    cfg = _fusion(args)
    if cfg.mode == "majority_vote":
        fused = vote([read_nifti(p, schema) for p in args.inputs], cfg)
    else:
        fused = prob_mean([read_probmap(p) for p in args.inputs], cfg, schema)
    write_nifti(fused, args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    schema = get_schema(args.schema)
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    fcfg = FusionConfig(**doc.get("fusion", {})) if doc.get("fusion") else _fusion(args)
    if doc.get("postprocess") is not None:
        pcfg = PostprocConfig(**doc["postprocess"])
    else:
        pcfg = _pp_config(args)
    dirs = [list_cases(d) for d in args.inputs]
    common = sorted(set.intersection(*(set(d) for d in dirs))) if dirs else []
    missing = sorted(set.union(*(set(d) for d in dirs)) - set(common)) if dirs else []
    _ensure_dir(args.out)

    def run(case):
        paths = [d[case] for d in dirs]
        maps = [read_nifti(p, schema) for p in paths]
        fused = maps[0] if len(maps) == 1 else vote(maps, fcfg)
        write_nifti(postprocess(fused, pcfg), os.path.join(args.out, os.path.basename(paths[0])))

    _map(run, common, n_threads(args))
    inputs = [d[c] for d in dirs for c in common]
    write_manifest(args.out, "pipeline", {"fusion": _cfg_dict(fcfg), "postprocess": _cfg_dict(pcfg)}, inputs, args.seed)
    if missing:
        print(f"cases missing from some inputs: {', '.join(missing)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _augment_cases(directory, channels, label_suffix):
    files = {case_stem(n): os.path.join(directory, n) for n in sorted(os.listdir(directory)) if n.endswith(NIFTI_SUFFIXES)}
    label_of = {s[: -len(label_suffix)]: p for s, p in files.items() if s.endswith(label_suffix)}
    cases = {}
    if channels:
        for stem in files:
            for ch in channels:
                if stem.endswith("_" + ch):
                    case = stem[: -len(ch) - 1]
                    cases.setdefault(case, {})[ch] = files[stem]
        cases = {c: [chs[ch] for ch in channels] for c, chs in cases.items() if len(chs) == len(channels)}
    else:
        cases = {s: [p] for s, p in files.items() if not s.endswith(label_suffix)}
    return {c: (paths, label_of.get(c)) for c, paths in sorted(cases.items())}


def cmd_augment(args) -> int:
    if args.seed is None:
        print("augment requires --seed", file=sys.stderr)
        return 1
    schema = get_schema(args.schema)
    cfg = AugmentConfig.from_json(args.config, master_seed=args.seed)
    channels = [c for c in (args.channels or "").split(",") if c]
    cases = _augment_cases(args.inp, channels, args.label_suffix)
    _ensure_dir(args.out)

    def run(item):
        case, (paths, label_path) = item
        vols = [read_nifti(p) for p in paths]
        labels = read_nifti(label_path, schema) if label_path else None
        out_vols, out_labels = apply_pipeline(vols, labels, cfg, case)
        for p, v in zip(paths, out_vols):
            write_nifti(v, os.path.join(args.out, os.path.basename(p)))
        if label_path:
            write_nifti(out_labels, os.path.join(args.out, os.path.basename(label_path)))

    _map(run, list(cases.items()), n_threads(args))
    inputs = [p for paths, lab in cases.values() for p in paths + ([lab] if lab else [])]
    write_manifest(args.out, "augment", cfg.to_dict(), inputs, args.seed)
    return EXIT_OK


def _image_metric_rows(case, ref_path, pred_path, mask_path, cfg):
    ref, pred = read_nifti(ref_path), read_nifti(pred_path)
    rows = [[case, "full", ssim(ref, pred, cfg), psnr(ref, pred, cfg), mse(ref, pred)]]
    if mask_path:
        mask = read_nifti(mask_path).data > 0
        rows.append([case, "mask", ssim(ref, pred, cfg, mask), psnr(ref, pred, cfg, mask), mse(ref, pred, mask)])
    return rows


def cmd_inpaint_eval(args) -> int:
    cfg = ImageMetricConfig(data_range=args.data_range, window_size=args.window, slice_mode=args.slice_mode)
    if os.path.isdir(args.ref):
        refs, preds = list_cases(args.ref), list_cases(args.pred)
        masks = list_cases(args.mask) if args.mask else {}
        common = sorted(set(refs) & set(preds))
        unmatched = sorted(set(refs) ^ set(preds))
        items = [(c, refs[c], preds[c], masks.get(c)) for c in common]
    else:
        items = [(args.case_id or case_stem(args.ref), args.ref, args.pred, args.mask)]
        unmatched = []
    rows = _map(lambda it: _image_metric_rows(*it, cfg), items, n_threads(args))
    flat = [r for rs in rows for r in rs]
    if args.out:
        write_csv(args.out, IMAGE_COLUMNS, flat)
    else:
        print(",".join(IMAGE_COLUMNS))
        for r in flat:
            print(",".join(v if isinstance(v, str) else fmt(v) for v in r))
    if unmatched or not items:
        print(f"unmatched cases: {', '.join(unmatched) or '(none found)'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_loss(args) -> int:
    schema = get_schema(args.schema)
    w = [float(x) for x in args.weights.split(",")]
    if len(w) != 4:
        print("--weights takes four comma-separated values (dice,focal,bbox,inertia)", file=sys.stderr)
        return 1
    weights = LossWeights(*w, focal_gamma=args.gamma)
    total, terms = total_loss(read_probmap(args.pred), read_nifti(args.gt, schema), weights)
    doc = json.dumps({"total": total, "terms": terms, "weights": w}, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(doc + "\n")
    else:
        print(doc)
    return EXIT_OK


def cmd_phantom(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        doc = json.load(fh)
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = PhantomSpec.from_dict(doc)
    name = doc.get("name", case_stem(args.spec))
    _ensure_dir(args.out)
    vol, labels, truth = generate(spec)
    write_nifti(vol, os.path.join(args.out, f"{name}.nii.gz"))
    write_nifti(labels, os.path.join(args.out, f"{name}_seg.nii.gz"))
    with open(os.path.join(args.out, f"{name}_truth.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(truth.to_json() + "\n")
    write_manifest(args.out, "phantom", doc, [args.spec], spec.seed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--schema", default="agpt", choices=["agpt", "pre"])
    common.add_argument("--threads", type=int, default=None, help="parallel workers; evaluate uses processes, others threads (default: $GLIAKIT_THREADS or 1)")
    common.add_argument("--seed", type=int, default=None)

    p = argparse.ArgumentParser(prog="gliakit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gliakit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("evaluate", parents=[common], help="classic and lesion-wise Dice/HD95")
    e.add_argument("--gt", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--regions", default="WT,TC,ET")
    e.add_argument("--out", required=True)
    e.add_argument("--lw-config", dest="lw_config")
    e.add_argument("--lesion-json", dest="lesion_json")
    e.add_argument("--pairs", help="CSV with columns case_id,gt,pred")
    e.set_defaults(func=cmd_evaluate)

    def pp_flags(sp):
        sp.add_argument("--dust", type=int, default=None)
        sp.add_argument("--et-wt", dest="et_wt", type=float, default=None)
        sp.add_argument("--snfh-wt", dest="snfh_wt", type=float, default=None)
        sp.add_argument("--no-ratio-rules", dest="no_ratio_rules", action="store_true")
        sp.add_argument("--pp-config", dest="pp_config")

    pp = sub.add_parser("postprocess", parents=[common], help="dust removal and ratio relabeling")
    pp.add_argument("--in", dest="inp", required=True)
    pp.add_argument("--out", required=True)
    pp_flags(pp)
    pp.set_defaults(func=cmd_postprocess)

    en = sub.add_parser("ensemble", parents=[common], help="fuse predictions")
    en.add_argument("--inputs", nargs="+", required=True)
    en.add_argument("--mode", choices=["vote", "prob_mean"], default="vote")
    en.add_argument("--weights")
    en.add_argument("--out", required=True)
    en.set_defaults(func=cmd_ensemble)

    pl = sub.add_parser("pipeline", parents=[common], help="ensemble then postprocess, per case")
    pl.add_argument("--inputs", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--mode", choices=["vote"], default="vote")
    pl.add_argument("--weights")
    pl.add_argument("--config")
    pp_flags(pl)
    pl.set_defaults(func=cmd_pipeline)

    au = sub.add_parser("augment", parents=[common], help="seeded probability-gated augmentation")
    au.add_argument("--in", dest="inp", required=True)
    au.add_argument("--out", required=True)
    au.add_argument("--config", required=True)
    au.add_argument("--channels", help="comma-separated channel suffixes, files named <case>_<channel>.nii.gz")
    au.add_argument("--label-suffix", dest="label_suffix", default="_seg")
    au.set_defaults(func=cmd_augment)

    ie = sub.add_parser("inpaint-eval", parents=[common], help="SSIM, PSNR and MSE")
    ie.add_argument("--ref", required=True)
    ie.add_argument("--pred", required=True)
    ie.add_argument("--mask")
    ie.add_argument("--data-range", dest="data_range", type=float)
    ie.add_argument("--window", type=int, default=11)
    ie.add_argument("--slice-mode", dest="slice_mode", action="store_true")
    ie.add_argument("--case-id", dest="case_id")
    ie.add_argument("--out")
    ie.set_defaults(func=cmd_inpaint_eval)

    lo = sub.add_parser("loss", parents=[common], help="forward composite loss breakdown")
    lo.add_argument("--pred", required=True)
    lo.add_argument("--gt", required=True)
    lo.add_argument("--weights", default="1,1,0.1,0.1")
    lo.add_argument("--gamma", type=float, default=2.0)
    lo.add_argument("--out")
    lo.set_defaults(func=cmd_loss)

    ph = sub.add_parser("phantom", parents=[common], help="generate a synthetic labeled case")
    ph.add_argument("--spec", required=True)
    ph.add_argument("--out", required=True)
    ph.set_defaults(func=cmd_phantom)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GliakitError, ValueError, OSError) as exc:
        print(f"gliakit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
