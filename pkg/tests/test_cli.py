import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import labelmap, volume, write_case_dirs
from gliakit.cli import case_stem, main
from gliakit.ensemble import vote
from gliakit.labels import AGPT, NETC
from gliakit.losses import LossWeights, total_loss
from gliakit.metrics_image import ImageMetricConfig, mse, psnr, ssim
from gliakit.metrics_seg import evaluate_case
from gliakit.nifti import read_nifti, write_nifti, write_probmap
from gliakit.phantom import generate, random_spec
from gliakit.postproc import PostprocConfig, postprocess
from gliakit.reports import fmt
from gliakit.volume import ProbMap


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_case_stem():
    assert case_stem("/a/b/BraTS-001.nii.gz") == "BraTS-001"


class TestEvaluate:
    def test_self_evaluation(self, tmp_path):
        gt_dir, _ = write_case_dirs(tmp_path, 3)
        out = tmp_path / "r.csv"
        assert main(["evaluate", "--gt", str(gt_dir), "--pred", str(gt_dir), "--out", str(out)]) == 0
        rows = read_rows(out)
        assert len(rows) == 3 * 3 + 3
        for r in rows:
            if r["case_id"] == "mean":
                continue
            if r["n_tp"] == "0":  # region absent in this case
                assert (r["dice"], r["hd95"], r["lw_dice"], r["lw_hd95"]) == ("1.000000", "nan", "1.000000", "0.000000")
            else:
                assert (r["dice"], r["hd95"], r["lw_dice"], r["lw_hd95"]) == ("1.000000", "0.000000", "1.000000", "0.000000")

    def test_matches_direct_evaluation(self, tmp_path):
        gt_dir, pred_dir = write_case_dirs(tmp_path, 3, seed=4)
        out = tmp_path / "r.csv"
        lj = tmp_path / "lesions.json"
        main(["evaluate", "--gt", str(gt_dir), "--pred", str(pred_dir), "--out", str(out), "--lesion-json", str(lj)])
        rows = read_rows(out)
        for i in range(3):
            rep = evaluate_case(
                read_nifti(gt_dir / f"case{i:03d}.nii.gz", AGPT), read_nifti(pred_dir / f"case{i:03d}.nii.gz", AGPT)
            )
            for region in ("WT", "TC", "ET"):
                row = [r for r in rows if r["case_id"] == f"case{i:03d}" and r["region"] == region][0]
                rr = rep[region]
                assert row["lw_dice"] == fmt(rr.lw_dice) and row["hd95"] == fmt(rr.hd95)
                assert int(row["n_fp"]) == rr.n_fp
        doc = json.loads(lj.read_text())
        assert set(doc) == {"case000", "case001", "case002"}

    def test_empty_pred_dir(self, tmp_path, capsys):
        gt_dir, _ = write_case_dirs(tmp_path, 2)
        empty = tmp_path / "empty"
        empty.mkdir()
        out = tmp_path / "r.csv"
        assert main(["evaluate", "--gt", str(gt_dir), "--pred", str(empty), "--out", str(out)]) != 0
        assert read_rows(out) == []
        assert "case000" in capsys.readouterr().err

    def test_unmatched_partial(self, tmp_path):
        gt_dir, pred_dir = write_case_dirs(tmp_path, 3)
        (pred_dir / "case002.nii.gz").unlink()
        out = tmp_path / "r.csv"
        assert main(["evaluate", "--gt", str(gt_dir), "--pred", str(pred_dir), "--out", str(out)]) == 2
        assert {r["case_id"] for r in read_rows(out)} == {"case000", "case001", "mean"}

    def test_pairs_file_and_threads(self, tmp_path):
        gt_dir, pred_dir = write_case_dirs(tmp_path, 3)
        pairs = tmp_path / "pairs.csv"
        pairs.write_text(
            "case_id,gt,pred\n" + "".join(f"x{i},{gt_dir}/case{i:03d}.nii.gz,{pred_dir}/case{i:03d}.nii.gz\n" for i in range(3))
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["evaluate", "--gt", "-", "--pred", "-", "--pairs", str(pairs), "--out", str(a)])
        main(["evaluate", "--gt", "-", "--pred", "-", "--pairs", str(pairs), "--out", str(b), "--threads", "3"])
        assert a.read_bytes() == b.read_bytes()
        assert read_rows(a)[0]["case_id"] == "x0"

    def test_lw_config(self, tmp_path):
        gt_dir, pred_dir = write_case_dirs(tmp_path, 1, perturbations=["drop_lesion"])
        cfgp = tmp_path / "lw.json"
        cfgp.write_text(json.dumps({"fp_fn_hd95_penalty_mm": 100.0}))
        out = tmp_path / "r.csv"
        main(["evaluate", "--gt", str(gt_dir), "--pred", str(pred_dir), "--out", str(out), "--lw-config", str(cfgp), "--regions", "WT"])
        row = read_rows(out)[0]
        n = int(row["n_tp"]) + int(row["n_fn"]) + int(row["n_fp"])
        assert float(row["lw_hd95"]) >= 100.0 * int(row["n_fn"]) / n - 1e-6


class TestPipeline:
    def test_single_input_identity(self, tmp_path):
        gt_dir, _ = write_case_dirs(tmp_path, 3)
        out = tmp_path / "out"
        rc = main(["pipeline", "--inputs", str(gt_dir), "--out", str(out), "--dust", "0", "--no-ratio-rules"])
        assert rc == 0
        for f in gt_dir.iterdir():
            assert (out / f.name).read_bytes() == f.read_bytes()
        assert sorted(p.name for p in out.iterdir() if p.suffix == ".json") == ["manifest.json"]

    def test_three_copies(self, tmp_path):
        gt_dir, _ = write_case_dirs(tmp_path, 2)
        out = tmp_path / "out"
        main(["pipeline", "--inputs", str(gt_dir), str(gt_dir), str(gt_dir), "--out", str(out), "--dust", "0", "--no-ratio-rules"])
        for f in gt_dir.iterdir():
            assert (out / f.name).read_bytes() == f.read_bytes()

    def test_composition(self, tmp_path):
        dirs = []
        for k in range(3):
            d = tmp_path / f"m{k}"
            d.mkdir()
            dirs.append(d)
        rng = np.random.default_rng(0)
        for i in range(2):
            _, gt, _ = generate(random_spec(i))
            for d in dirs:
                noisy = gt.data.copy()
                flip = rng.random(noisy.shape) < 0.02
                noisy[flip] = rng.integers(0, 4, size=int(flip.sum()))
                write_nifti(gt.with_data(noisy), d / f"c{i}.nii.gz")
        out = tmp_path / "out"
        assert main(["pipeline", "--inputs", *map(str, dirs), "--out", str(out)]) == 0
        for i in range(2):
            maps = [read_nifti(d / f"c{i}.nii.gz", AGPT) for d in dirs]
            expected = postprocess(vote(maps), PostprocConfig())
            np.testing.assert_array_equal(read_nifti(out / f"c{i}.nii.gz", AGPT).data, expected.data)

    def test_manifest_reruns(self, tmp_path):
        gt_dir, _ = write_case_dirs(tmp_path, 2)
        for name in ("o1", "o2"):
            main(["pipeline", "--inputs", str(gt_dir), str(gt_dir), "--out", str(tmp_path / name), "--seed", "3"])
        m1 = json.loads((tmp_path / "o1" / "manifest.json").read_text())
        m2 = json.loads((tmp_path / "o2" / "manifest.json").read_text())
        m1.pop("timestamp"), m2.pop("timestamp")
        assert m1 == m2 and m1["master_seed"] == 3 and len(m1["inputs"]) == 2
        for f in (tmp_path / "o1").iterdir():
            if f.name != "manifest.json":
                assert f.read_bytes() == (tmp_path / "o2" / f.name).read_bytes()


def test_postprocess_file_and_dir(tmp_path):
    a = np.zeros((16, 16, 16), np.uint8)
    a[2:12, 2:12, 2:12] = 2
    a[14, 14, 14] = 3
    src = tmp_path / "in"
    src.mkdir()
    write_nifti(labelmap(a), src / "c.nii.gz")
    main(["postprocess", "--in", str(src / "c.nii.gz"), "--out", str(tmp_path / "o.nii.gz"), "--dust", "50"])
    out = read_nifti(tmp_path / "o.nii.gz", AGPT).data
    assert out[14, 14, 14] == 0
    # the remaining map is pure SNFH, so the ratio rule turns it into NETC
    assert (out[2:12, 2:12, 2:12] == NETC).all()
    main(["postprocess", "--in", str(src), "--out", str(tmp_path / "od"), "--no-ratio-rules"])
    assert (read_nifti(tmp_path / "od" / "c.nii.gz", AGPT).data[2:12, 2:12, 2:12] == 2).all()
    assert (tmp_path / "od" / "manifest.json").exists()


def test_ensemble_vote_and_prob(tmp_path):
    maps = [np.full((4, 4, 4), v, np.uint8) for v in (3, 3, 2)]
    paths = []
    for i, m in enumerate(maps):
        paths.append(str(tmp_path / f"m{i}.nii.gz"))
        write_nifti(labelmap(m), paths[-1])
    main(["ensemble", "--inputs", *paths, "--mode", "vote", "--out", str(tmp_path / "f.nii.gz")])
    assert (read_nifti(tmp_path / "f.nii.gz", AGPT).data == 3).all()

    p1 = ProbMap(labelmap(maps[0]).geometry, (0, 1), np.stack([np.full((4, 4, 4), 0.6), np.full((4, 4, 4), 0.4)]))
    p2 = ProbMap(p1.geometry, (0, 1), np.stack([np.full((4, 4, 4), 0.2), np.full((4, 4, 4), 0.8)]))
    write_probmap(p1, tmp_path / "p1.nii.gz")
    write_probmap(p2, tmp_path / "p2.nii.gz")
    args = ["ensemble", "--inputs", str(tmp_path / "p1.nii.gz"), str(tmp_path / "p2.nii.gz"), "--mode", "prob_mean"]
    main(args + ["--out", str(tmp_path / "pm.nii.gz")])
    assert (read_nifti(tmp_path / "pm.nii.gz", AGPT).data == 1).all()
    main(args + ["--weights", "1,0", "--out", str(tmp_path / "pw.nii.gz")])
    assert (read_nifti(tmp_path / "pw.nii.gz", AGPT).data == 0).all()


def test_loss_command(tmp_path):
    rng = np.random.default_rng(1)
    lab = labelmap(rng.integers(0, 3, size=(6, 6, 6)))
    raw = rng.random((3, 6, 6, 6))
    pm = ProbMap(lab.geometry, (0, 1, 2), raw / raw.sum(axis=0))
    write_nifti(lab, tmp_path / "gt.nii.gz")
    write_probmap(pm, tmp_path / "p.nii.gz")
    out = tmp_path / "loss.json"
    main(["loss", "--pred", str(tmp_path / "p.nii.gz"), "--gt", str(tmp_path / "gt.nii.gz"), "--out", str(out)])
    doc = json.loads(out.read_text())
    total, terms = total_loss(pm, lab, LossWeights())
    assert doc["total"] == pytest.approx(total, abs=1e-12)
    assert set(doc["terms"]) == {"dice", "focal", "bbox", "inertia"}
    assert main(["loss", "--pred", str(tmp_path / "p.nii.gz"), "--gt", str(tmp_path / "gt.nii.gz"), "--weights", "1,1"]) == 1


def test_phantom_command(tmp_path):
    spec = {"dims": [16, 16, 16], "lesions": [{"center": [8, 8, 8], "semi_axes_mm": [3, 3, 3], "label": 3}], "name": "p1"}
    sp = tmp_path / "spec.json"
    sp.write_text(json.dumps(spec))
    main(["phantom", "--spec", str(sp), "--out", str(tmp_path / "a"), "--seed", "5"])
    main(["phantom", "--spec", str(sp), "--out", str(tmp_path / "b"), "--seed", "5"])
    for name in ("p1.nii.gz", "p1_seg.nii.gz", "p1_truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    truth = json.loads((tmp_path / "a" / "p1_truth.json").read_text())
    assert truth["voxel_counts"][0] == int((read_nifti(tmp_path / "a" / "p1_seg.nii.gz", AGPT).data == 3).sum())


def test_augment_command(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    for i in range(3):
        vol, lab, _ = generate(random_spec(i))
        write_nifti(vol, src / f"c{i}_t1.nii.gz")
        write_nifti(vol, src / f"c{i}_flair.nii.gz")
        write_nifti(lab, src / f"c{i}_seg.nii.gz")
    cfg = tmp_path / "aug.json"
    cfg.write_text(json.dumps({"transforms": [{"kind": "flip", "probability": 1.0}, {"kind": "gaussian_noise", "probability": 1.0}]}))
    base = ["augment", "--in", str(src), "--config", str(cfg), "--channels", "t1,flair"]
    assert main(base + ["--out", str(tmp_path / "x")]) == 1  # --seed is mandatory
    main(base + ["--out", str(tmp_path / "o1"), "--seed", "1234"])
    main(base + ["--out", str(tmp_path / "o2"), "--seed", "1234", "--threads", "2"])
    names = sorted(p.name for p in (tmp_path / "o1").iterdir())
    assert len(names) == 10
    for n in names:
        if n != "manifest.json":
            assert (tmp_path / "o1" / n).read_bytes() == (tmp_path / "o2" / n).read_bytes()
    seg = read_nifti(tmp_path / "o1" / "c0_seg.nii.gz", AGPT)
    assert set(np.unique(seg.data)) <= set(AGPT.labels)


def test_inpaint_eval(tmp_path):
    rng = np.random.default_rng(2)
    ref = volume(rng.random((12, 12, 12)))
    pred = volume(np.clip(ref.data + rng.normal(0, 0.05, (12, 12, 12)), 0, 1))
    mask = np.zeros((12, 12, 12))
    mask[3:9, 3:9, 3:9] = 1
    for name, v in (("ref", ref), ("pred", pred), ("mask", volume(mask))):
        write_nifti(v, tmp_path / f"{name}.nii.gz")
    out = tmp_path / "m.csv"
    args = ["inpaint-eval", "--ref", str(tmp_path / "ref.nii.gz"), "--pred", str(tmp_path / "pred.nii.gz")]
    main(args + ["--mask", str(tmp_path / "mask.nii.gz"), "--data-range", "1", "--window", "5", "--out", str(out)])
    rows = read_rows(out)
    assert [r["scope"] for r in rows] == ["full", "mask"]
    cfg = ImageMetricConfig(data_range=1.0, window_size=5)
    r, p = read_nifti(tmp_path / "ref.nii.gz"), read_nifti(tmp_path / "pred.nii.gz")
    assert rows[0]["ssim"] == fmt(ssim(r, p, cfg)) and rows[0]["psnr"] == fmt(psnr(r, p, cfg))
    assert rows[1]["mse"] == fmt(mse(r, p, mask > 0))
    main(args[:3] + ["--pred", str(tmp_path / "ref.nii.gz"), "--data-range", "1", "--out", str(out)])
    assert read_rows(out)[0]["psnr"] == "inf"


def test_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "gliakit.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("evaluate", "postprocess", "ensemble", "augment", "inpaint-eval", "loss", "phantom", "pipeline"):
        assert cmd in proc.stdout


def test_threads_env(monkeypatch, tmp_path):
    from argparse import Namespace

    from gliakit.cli import n_threads

    monkeypatch.setenv("GLIAKIT_THREADS", "3")
    assert n_threads(Namespace(threads=None)) == 3
    assert n_threads(Namespace(threads=2)) == 2
    gt_dir, pred_dir = write_case_dirs(tmp_path, 3)
    main(["evaluate", "--gt", str(gt_dir), "--pred", str(pred_dir), "--out", str(tmp_path / "env.csv")])
    monkeypatch.delenv("GLIAKIT_THREADS")
    main(["evaluate", "--gt", str(gt_dir), "--pred", str(pred_dir), "--out", str(tmp_path / "one.csv")])
    assert (tmp_path / "env.csv").read_bytes() == (tmp_path / "one.csv").read_bytes()


def test_invalid_input_exits_one(tmp_path, capsys):
    (tmp_path / "bad.nii.gz").write_bytes(b"not a nifti file")
    rc = main(["postprocess", "--in", str(tmp_path / "bad.nii.gz"), "--out", str(tmp_path / "o.nii.gz")])
    assert rc == 1
    assert "postprocess: error" in capsys.readouterr().err
    assert main(["phantom", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path / "p")]) == 1
