from .grid import CellRegion, GridSpec, partition_grid, cell_probabilities, DEFAULT_CELL_SIZE
from .sampler import SampledDetections, sample_features, sampled_at, cell_log_probabilities
from .detectors import detect_argmax, detect_nms, subsample_by_score, duplicate_fraction, DEFAULT_NMS_RADIUS
from .base import DetectionStrategy, GridArgmaxDetector, NmsDetector, make_detector, DETECTION_MODES

__all__ = [
    "CellRegion", "GridSpec", "partition_grid", "cell_probabilities", "DEFAULT_CELL_SIZE",
    "SampledDetections", "sample_features", "sampled_at", "cell_log_probabilities",
    "detect_argmax", "detect_nms", "subsample_by_score", "duplicate_fraction", "DEFAULT_NMS_RADIUS",
    "DetectionStrategy", "GridArgmaxDetector", "NmsDetector", "make_detector", "DETECTION_MODES",
]
