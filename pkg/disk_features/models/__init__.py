from .field import FeatureField, init_field, normalized_descriptor, normalize_rows, raw_descriptors
from .features import Keypoint, FeatureSet, feature_set_from_pixels
from .camera import CameraView, Scene

__all__ = [
    "FeatureField", "init_field", "normalized_descriptor", "normalize_rows", "raw_descriptors",
    "Keypoint", "FeatureSet", "feature_set_from_pixels",
    "CameraView", "Scene",
]
