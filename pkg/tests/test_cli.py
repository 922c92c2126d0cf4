import csv
import json

import numpy as np
import pytest

from disk_features.cli import main
from disk_features.geometry.scenes import generate_toy_scene, plant_oracle_fields
from disk_features.io import (
    TRAINING_CSV_COLUMNS, load_features, load_matches, load_scene, save_features, save_field, save_scene,
)
from disk_features.models.features import FeatureSet, Keypoint
from disk_features.models.field import init_field


@pytest.fixture(autouse=True)
def serial_pairs(monkeypatch):
    monkeypatch.setenv("DISK_THREADS", "1")


def _two_features(path):
    features = FeatureSet(4, 4, (Keypoint(0, 0, 1.0), Keypoint(3, 3, 0.5)), np.eye(2))
    save_features(features, path)
    return path


class TestSceneCommand:
    def test_writes_scene(self, tmp_path, capsys):
        out = tmp_path / "scene.json"
        assert main(["scene", "--height", "16", "--width", "24", "--views", "3", "--out", str(out)]) == 0
        scene = load_scene(out)
        assert (len(scene), scene.height, scene.width) == (3, 16, 24)
        assert "3 views, 16x24" in capsys.readouterr().out

    def test_unknown_kind_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["scene", "--scene-kind", "sphere", "--out", str(tmp_path / "s.json")])
        assert excinfo.value.code == 2

    def test_invalid_mask_fraction(self, tmp_path):
        assert main(["scene", "--mask-fraction", "1.5", "--out", str(tmp_path / "s.json")]) == 1

    def test_mask_fraction_above_limit(self, tmp_path):
        assert main(["scene", "--mask-fraction", "0.95", "--out", str(tmp_path / "s.json")]) == 1
        assert not (tmp_path / "s.json").exists()


class TestDetectCommand:
    @pytest.mark.parametrize("mode", ["grid", "nms"])
    def test_detect(self, tmp_path, capsys, mode):
        save_field(init_field(16, 16, 4, seed=1), tmp_path / "f.json")
        out = tmp_path / "features.json"
        assert main(["detect", str(tmp_path / "f.json"), "--mode", mode, "--h", "4", "--out", str(out)]) == 0
        assert capsys.readouterr().out.strip() == str(len(load_features(out)))

    def test_budget(self, tmp_path):
        save_field(init_field(16, 16, 4, seed=1), tmp_path / "f.json")
        out = tmp_path / "features.json"
        assert main(["detect", str(tmp_path / "f.json"), "--mode", "nms", "--budget", "2", "--out", str(out)]) == 0
        assert len(load_features(out)) <= 2

    def test_missing_field(self, tmp_path):
        assert main(["detect", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o.json")]) == 1


class TestMatchCommand:
    def test_inference(self, tmp_path):
        a = _two_features(tmp_path / "a.json")
        b = _two_features(tmp_path / "b.json")
        out = tmp_path / "m.json"
        assert main(["match", str(a), str(b), "--out", str(out)]) == 0
        matches = load_matches(out)
        assert matches.as_set() == {(0, 0), (1, 1)}
        assert matches.probabilities is not None

    def test_probabilistic(self, tmp_path):
        a = _two_features(tmp_path / "a.json")
        b = _two_features(tmp_path / "b.json")
        out = tmp_path / "m.json"
        assert main(["match", str(a), str(b), "--probabilistic", "--theta-m", "1", "--out", str(out)]) == 0
        matches = load_matches(out)
        assert len(matches) == 4
        document = json.loads(out.read_text())
        assert document["ratio_threshold"] is None
        assert document["theta_m"] == 1.0

    def test_probability_floor(self, tmp_path):
        a = _two_features(tmp_path / "a.json")
        b = _two_features(tmp_path / "b.json")
        out = tmp_path / "m.json"
        args = ["match", str(a), str(b), "--probabilistic", "--theta-m", "50", "--min-prob", "0.5", "--out", str(out)]
        assert main(args) == 0
        assert load_matches(out).as_set() == {(0, 0), (1, 1)}


class TestGradcheckCommand:
    def test_passes(self, tmp_path):
        out = tmp_path / "report.json"
        args = ["gradcheck", "--size", "8", "--n", "4", "--features", "2", "--seed", "1", "--out", str(out)]
        assert main(args) == 0
        report = json.loads(out.read_text())
        assert report["passed"] is True
        assert report["max_rel_error"] < 1e-3


class TestTrainCommand:
    def test_zero_steps(self, tmp_path):
        out_dir = tmp_path / "run"
        args = ["train", "--height", "16", "--width", "16", "--h", "4", "--n", "4", "--steps", "0",
                "--out-dir", str(out_dir)]
        assert main(args) == 0
        for name in ("scene.json", "view0.field.json", "view1.field.json", "best/view0.field.json", "summary.json"):
            assert (out_dir / name).exists(), name
        with open(out_dir / "training.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows == [TRAINING_CSV_COLUMNS]
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["steps"] == 0
        assert summary["final"] is None

    def test_short_run_with_plot(self, tmp_path):
        out_dir = tmp_path / "run"
        args = ["train", "--height", "16", "--width", "16", "--h", "4", "--n", "4", "--steps", "2",
                "--eval-interval", "1", "--lr", "0.01", "--plot", "--out-dir", str(out_dir)]
        assert main(args) == 0
        with open(out_dir / "training.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert [row["step"] for row in rows] == ["0", "1", "2"]
        assert (out_dir / "training.png").stat().st_size > 0

    def test_invalid_learning_rate(self, tmp_path):
        args = ["train", "--height", "16", "--width", "16", "--steps", "1", "--lr", "0",
                "--out-dir", str(tmp_path / "run")]
        assert main(args) == 1


class TestEvalCommand:
    def test_oracle_fields(self, tmp_path, capsys):
        scene_path = tmp_path / "scene.json"
        assert main(["scene", "--height", "32", "--width", "32", "--out", str(scene_path)]) == 0
        scene = load_scene(scene_path)
        paths = []
        for view, feature_field in enumerate(plant_oracle_fields(scene, 4, n=8, separation=8)):
            paths.append(str(tmp_path / f"view{view}.field.json"))
            save_field(feature_field, paths[-1])
        capsys.readouterr()

        out = tmp_path / "report.json"
        plot = tmp_path / "matches.png"
        assert main(["eval", *paths, "--scene", str(scene_path), "--out", str(out), "--plot", str(plot)]) == 0
        report = json.loads(out.read_text())
        assert report["precision"] == 1.0
        assert report["n_matches"] > 0
        assert json.loads(capsys.readouterr().out) == report
        assert plot.stat().st_size > 0

    def test_shared_field(self, tmp_path):
        scene = generate_toy_scene("fronto_planar", 16, 16)
        save_scene(scene, tmp_path / "scene.json")
        save_field(init_field(16, 16, 4), tmp_path / "f.json")
        args = ["eval", str(tmp_path / "f.json"), "--scene", str(tmp_path / "scene.json"), "--mode", "grid", "--h", "4"]
        assert main(args) == 0
