import numpy as np
import pytest

from disk_features.geometry.scenes import generate_toy_scene
from disk_features.models.camera import CameraView
from disk_features.models.field import FeatureField, init_field


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical or training tests that take seconds to minutes")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_field():
    return init_field(16, 16, n=4, seed=7)


@pytest.fixture
def toy_scene():
    return generate_toy_scene("fronto_planar", 32, 32, baseline=0.1, seed=0)


@pytest.fixture
def masked_scene():
    return generate_toy_scene("fronto_planar", 32, 32, baseline=0.1, depth_mask_fraction=0.3, seed=0)


def constant_view(height=32, width=32, depth=2.0, translation=(0.0, 0.0, 0.0), focal=100.0):
    """Pinhole view at the origin orientation looking at a constant-depth surface."""
    intrinsics = np.array([
        [focal, 0.0, (width - 1) / 2.0],
        [0.0, focal, (height - 1) / 2.0],
        [0.0, 0.0, 1.0],
    ])
    return CameraView(intrinsics, np.eye(3), np.asarray(translation, dtype=np.float64),
                      np.full((height, width), depth))


def field_from(heatmap, descriptors=None, n=4, seed=0):
    """Field with the given heatmap and random (or given) descriptors."""
    heatmap = np.asarray(heatmap, dtype=np.float64)
    if descriptors is None:
        descriptors = np.random.default_rng(seed).normal(size=heatmap.shape + (n,))
    return FeatureField(heatmap=heatmap, descriptors=descriptors)
