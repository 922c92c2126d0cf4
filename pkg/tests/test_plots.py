import pytest

from disk_features.detection.base import make_detector
from disk_features.geometry.scenes import plant_oracle_fields
from disk_features.matching import distance_matrix, match_inference
from disk_features.matching.inference import MatchSet
from disk_features.trainer import TrainConfig, train_toy
from disk_features.ui.plots import plot_matches, plot_training_curves
from disk_features.ui.styles import VisualStyle


@pytest.fixture(autouse=True)
def serial_pairs(monkeypatch):
    monkeypatch.setenv("DISK_THREADS", "1")


def test_training_curves(toy_scene, tmp_path):
    result = train_toy(toy_scene, TrainConfig(steps=2, lr=1e-2, h=8, n=4, eval_interval=1, eval_samples=1))
    reports = [result.baseline, *result.history]
    path = plot_training_curves(reports, tmp_path / "curves.png")
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("with_views", [True, False])
def test_match_overlay(toy_scene, tmp_path, with_views):
    field_a, field_b = plant_oracle_fields(toy_scene, 3, n=8, separation=8)
    detector = make_detector("nms")
    features_a, features_b = detector.execute(field_a), detector.execute(field_b)
    matches = match_inference(distance_matrix(features_a, features_b), 0.95)
    views = toy_scene.views if with_views else None
    path = plot_matches(field_a, field_b, features_a, features_b, matches, tmp_path / "m.png", views=views)
    assert path.stat().st_size > 0


def test_empty_overlay(toy_scene, tmp_path):
    field_a, field_b = plant_oracle_fields(toy_scene, 1)
    features = make_detector("grid", cell_size=8).execute(field_a)
    style = VisualStyle()
    style.layout.dpi = 40
    path = plot_matches(field_a, field_b, features, features, MatchSet(pairs=()), tmp_path / "e.png", style=style)
    assert path.exists()
