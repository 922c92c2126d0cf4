import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import constant_view
from disk_features.errors import InvalidArgumentError, ZeroBaselineError
from disk_features.geometry import (
    MatchLabel,
    ReprojectionStatus,
    classify_match,
    classify_pairs,
    correspondences,
    epipolar_distance,
    fundamental_matrix,
    generate_toy_scene,
    plant_oracle_fields,
    reproject,
    reproject_points,
    reward_table,
)
from disk_features.io import load_scene, save_scene
from disk_features.models.camera import CameraView, Scene


def _normalized_view(translation):
    return CameraView(np.eye(3), np.eye(3), np.asarray(translation, dtype=np.float64), np.ones((1, 1)))


class TestCameraView:
    def test_rejects_non_rotation(self):
        with pytest.raises(InvalidArgumentError):
            CameraView(np.eye(3), np.diag([1.0, 1.0, -1.0]), np.zeros(3), np.ones((2, 2)))

    def test_rejects_non_positive_focal(self):
        intrinsics = np.diag([0.0, 1.0, 1.0])
        with pytest.raises(InvalidArgumentError):
            CameraView(intrinsics, np.eye(3), np.zeros(3), np.ones((2, 2)))

    def test_scene_view_count(self):
        view = constant_view()
        with pytest.raises(InvalidArgumentError):
            Scene((view,))
        assert Scene((view, view, view)).pairs() == [(0, 1), (0, 2), (1, 2)]


class TestReproject:
    def test_identical_views(self):
        view = constant_view(depth=3.0)
        result = reproject(view, view, (7, 11))
        assert result.valid
        assert_allclose(result.as_tuple(), (7.0, 11.0), atol=1e-9)

    def test_translated_view(self):
        view_a = constant_view(101, 101, depth=1.0)
        view_b = constant_view(101, 101, depth=1.0, translation=(0.1, 0.0, 0.0))
        result = reproject(view_a, view_b, (50, 50))
        assert_allclose(result.as_tuple(), (60.0, 50.0), atol=1e-9)

    def test_no_depth(self):
        depth = np.ones((8, 8))
        depth[2, 3] = 0.0
        view = CameraView(constant_view(8, 8).intrinsics, np.eye(3), np.zeros(3), depth)
        result = reproject(view, view, (3, 2))
        assert result.status is ReprojectionStatus.NO_DEPTH
        assert np.isnan(result.x)

    def test_behind_camera(self):
        view_a = constant_view(depth=1.0)
        view_b = constant_view(depth=1.0, translation=(0.0, 0.0, -5.0))
        assert reproject(view_a, view_b, (3, 3)).status is ReprojectionStatus.BEHIND_CAMERA

    def test_out_of_image_targets_are_returned(self):
        view_a = constant_view(32, 32, depth=1.0)
        view_b = constant_view(32, 32, depth=1.0, translation=(1.0, 0.0, 0.0))
        result = reproject(view_a, view_b, (16, 16))
        assert result.valid
        assert result.x > 32

    def test_source_pixel_out_of_bounds(self):
        view = constant_view(8, 8)
        with pytest.raises(InvalidArgumentError):
            reproject(view, view, (8, 0))

    def test_round_trip(self):
        # 10 px shift: every reprojection lands on an integer pixel
        view_a = constant_view(101, 101, depth=1.0)
        view_b = constant_view(101, 101, depth=1.0, translation=(0.1, 0.0, 0.0))
        ys, xs = np.mgrid[0:101, 0:91]
        forward, _, _ = reproject_points(view_a, view_b, xs.ravel(), ys.ravel())
        assert_allclose(forward, np.column_stack([xs.ravel() + 10, ys.ravel()]), atol=1e-9)

        targets = np.rint(forward).astype(np.intp)
        back, _, _ = reproject_points(view_b, view_a, targets[:, 0], targets[:, 1])
        assert_allclose(back, np.column_stack([xs.ravel(), ys.ravel()]), atol=1e-6)

    def test_round_trip_through_rounded_pixels(self):
        scene = generate_toy_scene("fronto_planar", 32, 32, baseline=0.1, seed=0)
        view_a, view_b = scene.views
        sources, targets = correspondences(scene, 0, 1)
        back, _, _ = reproject_points(view_b, view_a, targets[:, 0], targets[:, 1])
        assert np.all(np.abs(back - sources) <= 0.5 + 1e-9)


class TestEpipolarDistance:
    def test_point_on_line(self):
        assert epipolar_distance(_normalized_view([0, 0, 0]), _normalized_view([1, 0, 0]),
                                 (0.3, 0.2), (0.9, 0.2)) == pytest.approx(0.0, abs=1e-12)

    def test_offset_point(self):
        assert epipolar_distance(_normalized_view([0, 0, 0]), _normalized_view([1, 0, 0]),
                                 (0.3, 0.2), (0.9, 0.25)) == pytest.approx(0.05, abs=1e-12)

    def test_same_pixel_along_baseline_ray(self):
        view_a = constant_view(depth=1.0)
        view_b = constant_view(depth=1.0, translation=(0.0, 0.0, 0.5))
        assert epipolar_distance(view_a, view_b, (10, 20), (10, 20)) == pytest.approx(0.0, abs=1e-9)

    def test_zero_baseline(self):
        view = constant_view()
        with pytest.raises(ZeroBaselineError):
            epipolar_distance(view, view, (1, 1), (2, 2))
        with pytest.raises(ZeroBaselineError):
            fundamental_matrix(view, view)

    def test_reprojected_points_lie_on_epipolar_lines(self):
        scene = generate_toy_scene("tilted_plane", 40, 40, baseline=0.2, seed=5)
        view_a, view_b = scene.views
        ys, xs = np.nonzero(view_a.depth_valid)
        points, _, _ = reproject_points(view_a, view_b, xs, ys)
        for x, y, target in list(zip(xs, ys, points))[::37]:
            assert epipolar_distance(view_a, view_b, (x, y), tuple(target)) == pytest.approx(0.0, abs=1e-6)

    def test_symmetric_in_views(self, rng):
        scene = generate_toy_scene("tilted_plane", 40, 40, baseline=0.2, seed=2)
        view_a, view_b = scene.views
        for _ in range(20):
            p_a = tuple(rng.integers(0, 40, size=2))
            p_b = tuple(rng.integers(0, 40, size=2))
            assert epipolar_distance(view_a, view_b, p_a, p_b) == pytest.approx(
                epipolar_distance(view_b, view_a, p_b, p_a), rel=1e-9, abs=1e-9
            )


class TestClassifyMatch:
    @pytest.mark.parametrize("kind", ["fronto_planar", "tilted_plane"])
    def test_ground_truth_is_correct(self, kind):
        scene = generate_toy_scene(kind, 48, 48, baseline=0.1, seed=1)
        sources, targets = correspondences(scene, 0, 1)
        sources, targets = sources[::7], targets[::7]
        labels = classify_pairs(scene.views[0], scene.views[1], sources, targets, epsilon=1.0)
        assert np.all(np.diag(labels) == MatchLabel.CORRECT)

    def test_masked_on_epipolar_is_plausible(self, masked_scene):
        view_a, view_b = masked_scene.views
        ys, xs = np.nonzero(~view_a.depth_valid)
        assert len(xs) > 0
        # pure x translation with identical intrinsics: epipolar lines are image rows
        targets = np.column_stack([(xs + 5) % view_b.width, ys])
        labels = classify_pairs(view_a, view_b, np.column_stack([xs, ys]), targets)
        assert np.all(np.diag(labels) == MatchLabel.PLAUSIBLE)

    def test_displaced_pairs_are_incorrect(self, toy_scene, rng):
        sources, targets = correspondences(toy_scene, 0, 1)
        shifted = targets.copy()
        shifted[:, 1] = (shifted[:, 1] + 25) % toy_scene.height
        labels = classify_pairs(toy_scene.views[0], toy_scene.views[1], sources, shifted, epsilon=2.0)
        assert np.all(np.diag(labels) == MatchLabel.INCORRECT)

    def test_single_pair_labels(self, toy_scene):
        sources, targets = correspondences(toy_scene, 0, 1)
        p_a, p_b = tuple(sources[0]), tuple(targets[0])
        assert classify_match(toy_scene, 0, 1, p_a, p_b) is MatchLabel.CORRECT
        far = (p_b[0], (p_b[1] + 20) % toy_scene.height)
        assert classify_match(toy_scene, 0, 1, p_a, far) is MatchLabel.INCORRECT

    def test_symmetric_in_views(self, masked_scene, rng):
        sources, targets = correspondences(masked_scene, 0, 1)
        for index in rng.choice(len(sources), size=30, replace=False):
            p_a = tuple(sources[index])
            p_b = tuple(np.clip(targets[index] + rng.integers(-3, 4, size=2), 0, 31))
            # non-integer epsilon keeps integer row offsets off the threshold
            forward = classify_match(masked_scene, 0, 1, p_a, p_b, epsilon=2.5)
            assert forward == classify_match(masked_scene, 1, 0, p_b, p_a, epsilon=2.5)

    def test_labels_partition(self, masked_scene, rng):
        points_a = rng.integers(0, 32, size=(20, 2))
        points_b = rng.integers(0, 32, size=(25, 2))
        labels = classify_pairs(masked_scene.views[0], masked_scene.views[1], points_a, points_b)
        assert labels.shape == (20, 25)
        assert set(np.unique(labels)) <= {0, 1, 2}

    def test_zero_baseline_never_plausible(self):
        depth = np.full((16, 16), 2.0)
        depth[4, 4] = 0.0
        view = CameraView(constant_view(16, 16).intrinsics, np.eye(3), np.zeros(3), depth)
        scene = Scene((view, view))
        assert classify_match(scene, 0, 1, (5, 5), (5, 5)) is MatchLabel.CORRECT
        assert classify_match(scene, 0, 1, (4, 4), (4, 4)) is MatchLabel.INCORRECT

    def test_epipolar_supervision(self, masked_scene):
        view_a, view_b = masked_scene.views
        ys, xs = np.nonzero(~view_a.depth_valid)
        on_line = np.column_stack([(xs + 3) % view_b.width, ys])
        off_line = np.column_stack([xs, (ys + 10) % view_b.height])
        sources = np.column_stack([xs, ys])
        assert np.all(np.diag(classify_pairs(view_a, view_b, sources, on_line, supervision="epipolar"))
                      == MatchLabel.CORRECT)
        assert np.all(np.diag(classify_pairs(view_a, view_b, sources, off_line, supervision="epipolar"))
                      == MatchLabel.INCORRECT)

    def test_epipolar_supervision_without_baseline(self):
        view = constant_view(8, 8)
        labels = classify_pairs(view, view, [(1, 1)], [(1, 1)], supervision="epipolar")
        assert labels[0, 0] == MatchLabel.INCORRECT

    def test_unknown_supervision(self, toy_scene):
        with pytest.raises(InvalidArgumentError):
            classify_pairs(toy_scene.views[0], toy_scene.views[1], [(0, 0)], [(0, 0)], supervision="flow")


class TestRewards:
    def test_label_rewards(self):
        assert MatchLabel.CORRECT.reward(1.0, -0.25) == 1.0
        assert MatchLabel.PLAUSIBLE.reward(1.0, -0.25) == 0.0
        assert MatchLabel.INCORRECT.reward(1.0, -0.25) == -0.25
        assert_allclose(reward_table(2.0, -1.0), [2.0, 0.0, -1.0])


class TestGenerateToyScene:
    def test_deterministic(self):
        first = generate_toy_scene("tilted_plane", 16, 16, 0.1, 0.2, seed=4)
        second = generate_toy_scene("tilted_plane", 16, 16, 0.1, 0.2, seed=4)
        for view_a, view_b in zip(first.views, second.views):
            assert np.array_equal(view_a.depth, view_b.depth)
            assert np.array_equal(view_a.rotation, view_b.rotation)

    def test_mask_fraction(self):
        scene = generate_toy_scene("fronto_planar", 64, 64, 0.1, depth_mask_fraction=0.3, seed=0)
        assert np.mean(~scene.views[0].depth_valid) == pytest.approx(0.3, abs=0.03)

    def test_largest_mask_fraction(self):
        scene = generate_toy_scene("fronto_planar", 32, 32, 0.1, depth_mask_fraction=0.9, seed=0)
        assert np.any(scene.views[0].depth_valid)
        assert np.mean(~scene.views[0].depth_valid) == pytest.approx(0.9, abs=0.05)

    def test_three_views(self):
        scene = generate_toy_scene(views=3, height=16, width=16)
        assert scene.is_triplet
        assert_allclose(scene.views[2].translation, [0.2, 0.0, 0.0])

    @pytest.mark.parametrize("kwargs", [
        {"kind": "cube"},
        {"height": 7},
        {"baseline": 0.0},
        {"depth_mask_fraction": 1.0},
        {"depth_mask_fraction": 0.95},
        {"depth_mask_fraction": -0.1},
        {"views": 4},
    ])
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            generate_toy_scene(**kwargs)

    def test_scene_file_round_trip(self, tmp_path):
        scene = generate_toy_scene("tilted_plane", 16, 24, 0.1, 0.2, seed=9, views=3)
        save_scene(scene, tmp_path / "scene.json")
        loaded = load_scene(tmp_path / "scene.json")
        assert len(loaded) == 3
        for original, restored in zip(scene.views, loaded.views):
            assert_allclose(restored.rotation, original.rotation)
            assert_allclose(restored.translation, original.translation)
            assert_allclose(restored.depth, original.depth, rtol=1e-6)
            assert np.array_equal(restored.depth_valid, original.depth_valid)


class TestPlantOracleFields:
    def test_planted_points_correspond(self, toy_scene):
        field_a, field_b = plant_oracle_fields(toy_scene, count=4, separation=8)
        ys_a, xs_a = np.nonzero(field_a.heatmap > 0)
        ys_b, xs_b = np.nonzero(field_b.heatmap > 0)
        assert len(xs_a) == len(xs_b) >= 1

        planted_a = set(zip(xs_a.tolist(), ys_a.tolist()))
        sources, targets = correspondences(toy_scene, 0, 1)
        lookup = {tuple(s): tuple(t) for s, t in zip(sources.tolist(), targets.tolist())}
        planted_b = {lookup[p] for p in planted_a}
        assert planted_b == set(zip(xs_b.tolist(), ys_b.tolist()))

        for p in planted_a:
            assert np.array_equal(field_a.descriptors[p[1], p[0]], field_b.descriptors[lookup[p][1], lookup[p][0]])

    def test_separation(self, toy_scene):
        field_a, _ = plant_oracle_fields(toy_scene, count=6, separation=10, seed=3)
        points = np.argwhere(field_a.heatmap > 0)
        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                assert np.max(np.abs(points[i] - points[j])) >= 10
