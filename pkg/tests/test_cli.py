import json
import os
import subprocess
import sys

import numpy as np
import pytest

from graphunmix.cli import main
from graphunmix.scene import load_scene
from graphunmix.solvers import Factorization, save_factorization


def run(*argv):
    return main([str(a) for a in argv])


def artifact_bytes(root):
    """Every file under ``root`` except run manifests, keyed by relative path."""
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            if name == "manifest.json":
                continue
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


@pytest.fixture
def scene_dir(tmp_path, scene_files):
    cfg, lib = scene_files
    out = tmp_path / "scene"
    assert run("simulate", cfg, "--out", out, "--library", lib) == 0
    return out


def noiseless_config(scene_files, tmp_path):
    cfg, lib = scene_files
    doc = json.load(open(cfg))
    doc["snr_db"] = None
    doc["label_map_path"] = os.path.join(os.path.dirname(cfg), "labels.csv")
    path = tmp_path / "clean.json"
    path.write_text(json.dumps(doc))
    return path, lib


class TestSimulate:
    def test_outputs(self, scene_dir):
        names = sorted(os.listdir(scene_dir))
        assert names == ["abundances.f64m", "endmembers.f64m", "manifest.json", "observed.f64m", "scene.json"]
        scene = load_scene(scene_dir)
        assert scene.observed.shape == (30, 16)
        assert scene.true_abundances.shape == (16, 3)
        manifest = json.load(open(scene_dir / "manifest.json"))
        assert manifest["command"] == "simulate" and manifest["seeds"] == [3]

    def test_rerun_identical(self, tmp_path, scene_files, scene_dir):
        cfg, lib = scene_files
        assert run("simulate", cfg, "--out", tmp_path / "again", "--library", lib) == 0
        assert artifact_bytes(scene_dir) == artifact_bytes(tmp_path / "again")

    def test_missing_label_map(self, tmp_path, scene_files, capsys):
        cfg, lib = scene_files
        doc = json.load(open(cfg))
        doc["label_map_path"] = "nowhere.csv"
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run("simulate", bad, "--out", tmp_path / "x", "--library", lib) == 2
        assert "label_map_path" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, scene_files, capsys):
        cfg, lib = scene_files
        doc = json.load(open(cfg))
        doc["blur"] = 1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run("simulate", bad, "--out", tmp_path / "x", "--library", lib) == 2

    def test_bundled_defaults(self, tmp_path):
        cfg = os.path.join(os.path.dirname(__import__("graphunmix").__file__), "data", "scene.json")
        assert run("simulate", cfg, "--out", tmp_path / "s") == 0
        scene = load_scene(tmp_path / "s")
        assert scene.observed.shape == (224, 900)
        assert abs(scene.noise_stats.realized_snr_db - 30.0) <= 0.2


class TestEstimateP:
    def test_noiseless(self, tmp_path, scene_files):
        cfg, lib = noiseless_config(scene_files, tmp_path)
        assert run("simulate", cfg, "--out", tmp_path / "clean", "--library", lib) == 0
        assert run("estimate-p", tmp_path / "clean", "--out", tmp_path / "est") == 0
        doc = json.load(open(tmp_path / "est" / "estimate.json"))
        assert doc["estimated_p"] == 3
        assert doc["threshold"] == 0.995 and doc["centered"] is True

    def test_threshold_one(self, tmp_path, scene_dir):
        assert run("estimate-p", scene_dir, "--threshold", "1.0", "--no-centered", "--out", tmp_path / "e") == 0
        doc = json.load(open(tmp_path / "e" / "estimate.json"))
        assert doc["estimated_p"] == 16  # rank bounded by the pixel count

    def test_missing_dir(self, tmp_path):
        assert run("estimate-p", tmp_path / "nope", "--out", tmp_path / "e") == 2

    def test_bad_threshold(self, tmp_path, scene_dir):
        assert run("estimate-p", scene_dir, "--threshold", "0", "--out", tmp_path / "e") == 2


class TestUnmix:
    def test_run_json(self, tmp_path, scene_dir):
        out = tmp_path / "g"
        assert run("unmix", scene_dir, "--out", out, "--lambda", "5", "--knn-p", "3", "--max-iter", "30",
                   "--seed", "4") == 0
        info = json.load(open(out / "run.json"))
        assert info["method"] == "gnmf"
        assert info["options"]["lambda"] == 5.0 and info["options"]["seed"] == 4
        assert info["options"]["max_iter"] == 30
        assert info["graph"]["knn_p"] == 3 and info["graph"]["weighting"] == "binary"
        assert {"U.f64m", "V.f64m", "trace.csv", "run.json", "manifest.json"} <= set(os.listdir(out))

    def test_nmf_rejects_lambda(self, tmp_path, scene_dir):
        assert run("unmix", scene_dir, "--out", tmp_path / "n", "--method", "nmf", "--lambda", "1") == 2

    def test_sigma_needs_heat(self, tmp_path, scene_dir):
        assert run("unmix", scene_dir, "--out", tmp_path / "n", "--sigma-h", "1") == 2

    def test_spatial_graph(self, tmp_path, scene_dir):
        assert run("unmix", scene_dir, "--out", tmp_path / "s", "--graph", "spatial8", "--max-iter", "10") == 0
        assert run("unmix", scene_dir, "--out", tmp_path / "t", "--graph", "spatial4", "--weighting", "heat") == 2

    def test_auto_endmembers(self, tmp_path, scene_dir):
        assert run("unmix", scene_dir, "--out", tmp_path / "a", "--endmembers", "auto", "--max-iter", "5") == 0
        info = json.load(open(tmp_path / "a" / "run.json"))
        assert 1 <= info["options"]["p_endmembers"] <= 16

    def test_rerun_identical(self, tmp_path, scene_dir):
        for name in ("a", "b"):
            assert run("unmix", scene_dir, "--out", tmp_path / name, "--max-iter", "40", "--seed", "2") == 0
        assert artifact_bytes(tmp_path / "a") == artifact_bytes(tmp_path / "b")


class TestEvaluate:
    def test_ground_truth_run(self, tmp_path, scene_dir, capsys):
        scene = load_scene(scene_dir)
        save_factorization(tmp_path / "gt", Factorization(scene.true_endmembers, scene.true_abundances),
                           {"method": "truth"})
        capsys.readouterr()
        assert run("evaluate", scene_dir, tmp_path / "gt", "--out", tmp_path / "ev") == 0
        rep = json.load(open(tmp_path / "ev" / "eval_TRUTH.json"))
        assert rep["rms_sad_deg"] <= 1e-10 and rep["rms_aad_deg"] <= 1e-10
        assert rep["permutation"] == [0, 1, 2]
        lines = capsys.readouterr().out.splitlines()
        assert lines[1].split()[-1] == "0.00" and lines[2].split()[-1] == "0.00"

    def test_two_column_table(self, tmp_path, scene_dir):
        run("unmix", scene_dir, "--out", tmp_path / "nmf", "--method", "nmf", "--max-iter", "20")
        run("unmix", scene_dir, "--out", tmp_path / "gnmf", "--max-iter", "20")
        assert run("evaluate", scene_dir, tmp_path / "nmf", tmp_path / "gnmf", "--out", tmp_path / "ev") == 0
        lines = (tmp_path / "ev" / "table.txt").read_text().splitlines()
        assert lines[0].split() == ["NMF", "GNMF"]
        assert len(lines[1].split()) == 4  # "rms_SAD (deg)" plus two values

    def test_endmember_mismatch(self, tmp_path, scene_dir):
        run("unmix", scene_dir, "--out", tmp_path / "p2", "--endmembers", "2", "--max-iter", "5")
        assert run("evaluate", scene_dir, tmp_path / "p2", "--out", tmp_path / "ev") == 2


class TestPipeline:
    def test_seeds(self, tmp_path, scene_files):
        cfg, lib = scene_files
        seeds = [str(s) for s in range(10)]
        out = tmp_path / "pipe"
        assert run("pipeline", cfg, "--library", lib, "--out", out, "--max-iter", "20", "--seeds", *seeds) == 0
        agg = json.load(open(out / "aggregate.json"))
        for method in ("nmf", "gnmf"):
            assert len(agg["methods"][method]["runs"]) == 10
        assert agg["lambda"] == 100.0 and agg["failed"] == []
        assert os.path.isfile(out / "seed_7" / "gnmf" / "eval.json")

    def test_no_seeds(self, tmp_path, scene_files):
        cfg, lib = scene_files
        assert run("pipeline", cfg, "--library", lib, "--out", tmp_path / "p") == 2

    def test_single_seed_medians(self, tmp_path, scene_files):
        cfg, lib = noiseless_config(scene_files, tmp_path)
        out = tmp_path / "p"
        assert run("pipeline", cfg, "--library", lib, "--out", out, "--lambda", "0", "--max-iter", "30",
                   "--seeds", "5") == 0
        agg = json.load(open(out / "aggregate.json"))
        for method in ("nmf", "gnmf"):
            entry = agg["methods"][method]
            rep = json.load(open(out / "seed_5" / method / "eval.json"))
            assert entry["median_rms_sad_deg"] == rep["rms_sad_deg"]
            assert entry["median_rms_aad_deg"] == rep["rms_aad_deg"]
        # with lambda 0 both methods run the same updates
        m = agg["methods"]
        assert m["nmf"]["median_rms_sad_deg"] == m["gnmf"]["median_rms_sad_deg"]

    def test_threads_do_not_change_results(self, tmp_path, scene_files, monkeypatch):
        cfg, lib = scene_files
        args = ["--library", lib, "--max-iter", "15", "--seeds", "1", "2", "3"]
        assert run("pipeline", cfg, "--out", tmp_path / "serial", *args) == 0
        monkeypatch.setenv("UNMIX_THREADS", "3")
        assert run("pipeline", cfg, "--out", tmp_path / "threaded", *args) == 0
        assert artifact_bytes(tmp_path / "serial") == artifact_bytes(tmp_path / "threaded")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "graphunmix", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
