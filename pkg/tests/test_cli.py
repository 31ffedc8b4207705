import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from humask.cli import main
from humask.manifest import verify_manifest
from humask.nifti import read_nifti, write_nifti
from humask.volume import Volume3D

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def phantom_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("phantom")
    assert main(["phantom", "-o", str(out)]) == 0
    return out


def _manifest(path):
    return json.loads((Path(path) / "manifest.json").read_text())


def test_phantom_outputs(phantom_dir):
    doc = _manifest(phantom_dir)
    assert set(doc["outputs"]) == {"phantom.nii.gz", "labels.nii.gz", "phantom_spec.json"}
    assert doc["tool"] == "humask" and doc["subcommand"] == "phantom"
    assert verify_manifest(phantom_dir) == []
    raw = read_nifti(phantom_dir / "phantom.nii.gz").data  # stored in raw HU
    assert raw.min() == -175.0 and raw.max() > 200.0


def test_phantom_is_byte_deterministic(phantom_dir, tmp_path):
    assert main(["phantom", "-o", str(tmp_path)]) == 0
    assert _manifest(tmp_path)["outputs"] == _manifest(phantom_dir)["outputs"]


def test_mask_golden_defaults(tmp_path):
    ph = tmp_path / "ph"
    assert main(["phantom", "--shape", "96,96,96", "-o", str(ph)]) == 0
    assert main(["mask", str(ph / "phantom.nii.gz"), "-o", str(tmp_path / "m")]) == 0
    params = _manifest(tmp_path / "m")["params"]
    golden = json.loads((GOLDEN / "mask_defaults_params.json").read_text())
    assert params == golden
    assert params["lambda"] == 0.1 and params["ratio"] == 0.6
    assert params["sub"] == [16, 16, 16] and params["P"] == 216


def test_mask_and_verify(phantom_dir, tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["mask", str(phantom_dir / "phantom.nii.gz"), "--sub", "8,8,8", "--seed", "3", "-o", str(out)]) == 0
    assert "P=64" in capsys.readouterr().out
    assert verify_manifest(out) == []
    assert main(["verify", str(out / "plan.json"), str(phantom_dir / "phantom.nii.gz")]) == 0

    plan = json.loads((out / "plan.json").read_text())
    bg = next(e for e in plan["entries"] if not e["fg"])
    bg["masked"] = True
    (tmp_path / "bad.json").write_text(json.dumps(plan))
    assert main(["verify", str(tmp_path / "bad.json"), str(phantom_dir / "phantom.nii.gz")]) == 1
    assert "VIOLATION" in capsys.readouterr().out

    plan = json.loads((out / "plan.json").read_text())
    plan["entries"][5]["char"] += 1e-3
    (tmp_path / "drift.json").write_text(json.dumps(plan))
    assert main(["verify", str(tmp_path / "drift.json"), str(phantom_dir / "phantom.nii.gz")]) == 1


def test_mask_is_byte_deterministic(phantom_dir, tmp_path):
    for name in ("a", "b"):
        assert main(["mask", str(phantom_dir / "phantom.nii.gz"), "--sub", "8,8,8", "-o", str(tmp_path / name)]) == 0
    assert _manifest(tmp_path / "a")["outputs"] == _manifest(tmp_path / "b")["outputs"]


def test_mask_exit_codes(tmp_path):
    write_nifti(Volume3D(np.full((20, 16, 16), -1000.0)), tmp_path / "air.nii")
    assert main(["mask", str(tmp_path / "air.nii"), "--sub", "8,8,8", "-o", str(tmp_path / "o")]) == 4
    assert main(["mask", str(tmp_path / "air.nii"), "--sub", "4,4,4", "-o", str(tmp_path / "o")]) == 3
    assert main(["mask", str(tmp_path / "air.nii"), "--sub", "8,8,8", "--pad", "--ratio", "1",
                 "-o", str(tmp_path / "o")]) == 3
    assert main(["mask", str(tmp_path / "missing.nii"), "-o", str(tmp_path / "o")]) == 2
    (tmp_path / "junk.nii").write_bytes(b"\x00" * 400)
    assert main(["mask", str(tmp_path / "junk.nii"), "-o", str(tmp_path / "o")]) == 2


def test_mask_pad(tmp_path):
    write_nifti(Volume3D(np.full((20, 16, 16), 100.0)), tmp_path / "v.nii")
    assert main(["mask", str(tmp_path / "v.nii"), "--sub", "8,8,8", "--pad", "-o", str(tmp_path / "o")]) == 0
    assert read_nifti(tmp_path / "o" / "padded.nii.gz").shape == (24, 16, 16)
    assert _manifest(tmp_path / "o")["params"]["shape"] == [24, 16, 16]


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["mask"])
    assert err.value.code == 2
    (tmp_path / "spec.json").write_text("{broken")
    assert main(["phantom", "--spec", str(tmp_path / "spec.json"), "-o", str(tmp_path / "o")]) == 2
    (tmp_path / "spec2.json").write_text(json.dumps({"shape": [8, 8, 8], "background_level": 0.5}))
    assert main(["phantom", "--spec", str(tmp_path / "spec2.json"), "-o", str(tmp_path / "o")]) == 2


def test_analyze(phantom_dir, tmp_path, capsys):
    report = tmp_path / "r.csv"
    assert main(["analyze", str(phantom_dir / "phantom.nii.gz"), "--labels", str(phantom_dir / "labels.nii.gz"),
                 "--out", str(report), "--compare-reference"]) == 0
    assert "5.64" in capsys.readouterr().out
    rows = list(csv.DictReader(report.open()))
    assert list(rows[0]) == ["volume", "region", "voxels", "entropy_bits", "complexity", "mi_bits"]
    fg = next(r for r in rows if r["region"] == "Foreground")
    bg = next(r for r in rows if r["region"] == "Background")
    assert float(fg["entropy_bits"]) > float(bg["entropy_bits"])
    assert int(fg["voxels"]) + int(bg["voxels"]) == 32 ** 3


def test_analyze_parallel_matches_serial(phantom_dir, tmp_path):
    vols = [str(phantom_dir / "phantom.nii.gz")] * 3
    assert main(["analyze", *vols, "--out", str(tmp_path / "a.csv")]) == 0
    assert main(["analyze", *vols, "--out", str(tmp_path / "b.csv"), "--jobs", "3"]) == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_calibrate(phantom_dir, tmp_path):
    out = tmp_path / "c"
    assert main(["calibrate", "--volumes", str(phantom_dir / "phantom.nii.gz"),
                 "--labels", str(phantom_dir / "labels.nii.gz"), "--svg", "-o", str(out)]) == 0
    doc = json.loads((out / "calibration.json").read_text())
    assert 0.0 < doc["lambda_hat"] < 1.0
    assert (out / "fg_hist.csv").exists() and (out / "bg_hist.csv").exists()
    assert verify_manifest(out) == []


def test_calibrate_no_separation(tmp_path):
    write_nifti(Volume3D(np.full((8, 8, 8), 0.0)), tmp_path / "v.nii")
    labels = np.zeros((8, 8, 8), dtype=np.int32)
    labels[:4] = 1
    from humask.nifti import write_labels

    write_labels(labels, tmp_path / "l.nii")
    assert main(["calibrate", "--volumes", str(tmp_path / "v.nii"), "--labels", str(tmp_path / "l.nii"),
                 "-o", str(tmp_path / "c")]) == 5
    assert main(["calibrate", "--volumes", str(tmp_path / "v.nii"), "--labels", str(tmp_path / "l.nii"),
                 str(tmp_path / "l.nii"), "-o", str(tmp_path / "c")]) == 2


def test_pretrain(phantom_dir, tmp_path):
    out = tmp_path / "p"
    assert main(["pretrain", str(phantom_dir / "phantom.nii.gz"), "--epochs", "3", "-o", str(out)]) == 0
    lines = (out / "loss_history.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == 4
    assert (out / "model.fmpt").read_bytes()[:4] == b"FMPT"
    assert main(["pretrain", str(phantom_dir / "phantom.nii.gz"), "--epochs", "0", "-o", str(out)]) == 2


def test_pretrain_config_file(phantom_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 2, "lr": 10.0}))
    assert main(["pretrain", str(phantom_dir / "phantom.nii.gz"), "--config", str(cfg), "-o", str(tmp_path / "p")]) == 0
    assert len((tmp_path / "p" / "loss_history.csv").read_text().splitlines()) == 3
    cfg.write_text(json.dumps({"epochs": 2, "bogus": 1}))
    assert main(["pretrain", str(phantom_dir / "phantom.nii.gz"), "--config", str(cfg), "-o", str(tmp_path / "q")]) == 2


def test_sweep(phantom_dir, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", str(phantom_dir / "phantom.nii.gz"), "--epochs", "2", "--svg", "-o", str(out)]) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert len(rows) == 12
    assert {r["strategy"] for r in rows} == {"ForegroundHU", "Random", "LocalBlock"}
    assert {float(r["ratio"]) for r in rows} == {0.5, 0.6, 0.7, 0.8}
    assert all(math.isfinite(float(r["final_loss"])) for r in rows)
    assert (out / "sweep.svg").read_text().startswith("<svg")
    assert verify_manifest(out) == []


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "humask", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "humask" in res.stdout
