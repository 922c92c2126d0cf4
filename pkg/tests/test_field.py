import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose

from disk_features.errors import DegenerateDescriptorError, FieldFormatError, InvalidArgumentError
from disk_features.io import load_field, load_features, read_tensor, save_features, save_field, write_tensor
from disk_features.models.features import FeatureSet, Keypoint
from disk_features.models.field import FeatureField, init_field, normalized_descriptor


class TestInitField:
    def test_shapes_and_finiteness(self):
        field = init_field(8, 8, 4, seed=1)
        assert field.heatmap.shape == (8, 8)
        assert field.descriptors.shape == (8, 8, 4)
        assert np.all(np.isfinite(field.heatmap))
        assert np.all(np.isfinite(field.descriptors))

    def test_single_pixel(self):
        field = init_field(1, 1, 1, seed=0)
        assert field.shape == (1, 1)
        assert field.descriptor_dim == 1

    def test_same_seed_is_bit_identical(self):
        assert init_field(8, 8, 4, seed=3) == init_field(8, 8, 4, seed=3)
        assert init_field(8, 8, 4, seed=3) != init_field(8, 8, 4, seed=4)

    def test_initial_scales(self):
        field = init_field(64, 64, 16, seed=0)
        assert field.heatmap.std() == pytest.approx(0.1, rel=0.1)
        assert field.descriptors.std() == pytest.approx(1.0, rel=0.05)

    @pytest.mark.parametrize("dims", [(0, 4, 4), (4, 0, 4), (4, 4, 0)])
    def test_zero_dimension(self, dims):
        with pytest.raises(InvalidArgumentError):
            init_field(*dims)

    def test_rejects_non_finite(self):
        heatmap = np.zeros((2, 2))
        heatmap[0, 0] = np.nan
        with pytest.raises(InvalidArgumentError):
            FeatureField(heatmap=heatmap, descriptors=np.ones((2, 2, 3)))

    def test_arrays_are_read_only(self):
        field = init_field(4, 4, 2)
        with pytest.raises(ValueError):
            field.heatmap[0, 0] = 1.0


class TestNormalizedDescriptor:
    def _field(self, vector):
        descriptors = np.zeros((1, 1, len(vector)))
        descriptors[0, 0] = vector
        return FeatureField(heatmap=np.zeros((1, 1)), descriptors=descriptors)

    def test_three_four_five(self):
        assert_allclose(normalized_descriptor(self._field([3.0, 4.0]), 0, 0), [0.6, 0.8], atol=1e-7)

    def test_single_axis(self):
        assert_allclose(normalized_descriptor(self._field([0.0, 0.0, 5.0]), 0, 0), [0.0, 0.0, 1.0])

    def test_zero_vector(self):
        with pytest.raises(DegenerateDescriptorError):
            normalized_descriptor(self._field([0.0, 0.0]), 0, 0)

    def test_scale_invariance(self, rng):
        vector = rng.normal(size=6)
        base = normalized_descriptor(self._field(vector), 0, 0)
        for scale in (1e-3, 0.5, 7.0, 1e3):
            assert_allclose(normalized_descriptor(self._field(scale * vector), 0, 0), base, atol=1e-6)

    def test_out_of_bounds(self):
        with pytest.raises(InvalidArgumentError):
            normalized_descriptor(init_field(4, 4, 2), 4, 0)


class TestFeatureSet:
    def test_requires_unit_descriptors(self):
        with pytest.raises(InvalidArgumentError):
            FeatureSet(4, 4, (Keypoint(0, 0, 1.0),), np.array([[2.0, 0.0]]))

    def test_requires_distinct_pixels(self):
        with pytest.raises(InvalidArgumentError):
            FeatureSet(4, 4, (Keypoint(1, 1, 0.0), Keypoint(1, 1, 0.5)), np.eye(2))

    def test_log_probs_must_be_non_positive(self):
        with pytest.raises(InvalidArgumentError):
            FeatureSet(4, 4, (Keypoint(0, 0, 0.0),), np.array([[1.0, 0.0]]), log_probs=np.array([0.1]))

    def test_empty(self):
        features = FeatureSet.empty(4, 4, 3)
        assert len(features) == 0
        assert features.points.shape == (0, 2)


class TestFieldFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        field = init_field(5, 7, 3, seed=11)
        save_field(field, tmp_path / "view.field.json")
        loaded = load_field(tmp_path / "view.field.json")
        assert loaded == field
        assert loaded.descriptors.dtype == np.float32

    def test_header_layout(self, tmp_path):
        write_tensor(tmp_path / "t.dskf", np.arange(6, dtype=np.float32).reshape(2, 3))
        raw = (tmp_path / "t.dskf").read_bytes()
        assert raw[:4] == b"DSKF"
        assert struct.unpack("<IIII", raw[4:20]) == (1, 2, 3, 1)
        assert len(raw) == 20 + 6 * 4
        assert_allclose(read_tensor(tmp_path / "t.dskf")[:, :, 0], np.arange(6).reshape(2, 3))

    def test_channel_inner_order(self, tmp_path):
        tensor = np.arange(2 * 2 * 3, dtype=np.float32).reshape(2, 2, 3)
        write_tensor(tmp_path / "t.dskf", tensor)
        payload = np.frombuffer((tmp_path / "t.dskf").read_bytes()[20:], dtype="<f4")
        assert_allclose(payload, np.arange(12))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.dskf"
        write_tensor(path, np.zeros((2, 2)))
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(FieldFormatError) as excinfo:
            read_tensor(path)
        assert excinfo.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.dskf"
        header = b"DSKF" + struct.pack("<IIII", 1, 4, 4, 128)
        path.write_bytes(header + np.zeros(10, dtype="<f4").tobytes())
        with pytest.raises(FieldFormatError) as excinfo:
            read_tensor(path)
        assert excinfo.value.offset == 20 + 40

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.dskf"
        path.write_bytes(b"DSKF\x01\x00")
        with pytest.raises(FieldFormatError):
            read_tensor(path)

    def test_manifest_dimension_mismatch(self, tmp_path):
        field = init_field(4, 4, 3)
        save_field(field, tmp_path / "f.json")
        write_tensor(tmp_path / "f.heatmap.dskf", np.zeros((5, 4)))
        with pytest.raises(FieldFormatError):
            load_field(tmp_path / "f.json")

    def test_manifest_missing_key(self, tmp_path):
        (tmp_path / "f.json").write_text('{"heatmap": "a.dskf"}')
        with pytest.raises(FieldFormatError):
            load_field(tmp_path / "f.json")


class TestFeatureFiles:
    def test_round_trip_keeps_log_probs(self, tmp_path):
        features = FeatureSet(
            8, 6,
            (Keypoint(1, 2, 0.5), Keypoint(7, 5, -0.25)),
            np.array([[0.6, 0.8], [1.0, 0.0]]),
            log_probs=np.array([-1.5, -0.1]),
        )
        save_features(features, tmp_path / "f.json")
        loaded = load_features(tmp_path / "f.json")
        assert loaded.keypoints == features.keypoints
        assert_allclose(loaded.descriptors, features.descriptors)
        assert_allclose(loaded.log_probs, features.log_probs)

    def test_detected_sets_have_no_log_probs(self, tmp_path):
        save_features(FeatureSet(4, 4, (Keypoint(0, 0, 1.0),), np.array([[0.0, 1.0]])), tmp_path / "f.json")
        assert load_features(tmp_path / "f.json").log_probs is None
