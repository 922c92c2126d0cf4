from abc import ABC, abstractmethod
from typing import Dict, Optional

from ..errors import InvalidArgumentError
from ..models.features import FeatureSet
from ..models.field import FeatureField
from .detectors import DEFAULT_NMS_RADIUS, detect_argmax, detect_nms, subsample_by_score
from .grid import DEFAULT_CELL_SIZE, GridSpec, partition_grid

DETECTION_MODES = ("grid", "nms")


class DetectionStrategy(ABC):
    """Interface for deterministic (inference-time) keypoint detection."""

    mode: str = ""

    @abstractmethod
    def execute(self, field: FeatureField) -> FeatureSet:
        """
        Detect keypoints on a field.

        Args:
            field: Feature field to read heatmap and descriptors from

        Returns:
            FeatureSet without log-probabilities
        """
        pass


class GridArgmaxDetector(DetectionStrategy):
    """Argmax per grid cell, sign test for existence."""

    mode = "grid"

    def __init__(self, cell_size: int = DEFAULT_CELL_SIZE, budget: Optional[int] = None):
        self.cell_size = cell_size
        self.budget = budget
        self._grids: Dict[tuple, GridSpec] = {}

    def _grid_for(self, field: FeatureField) -> GridSpec:
        key = (field.height, field.width)
        if key not in self._grids:
            self._grids[key] = partition_grid(field.height, field.width, self.cell_size)
        return self._grids[key]

    def execute(self, field: FeatureField) -> FeatureSet:
        features = detect_argmax(field, self._grid_for(field))
        if self.budget is not None:
            features = subsample_by_score(features, self.budget)
        return features


class NmsDetector(DetectionStrategy):
    """Local maxima of the full heatmap, no grid constraint."""

    mode = "nms"

    def __init__(self, window_radius: int = DEFAULT_NMS_RADIUS, budget: Optional[int] = None):
        self.window_radius = window_radius
        self.budget = budget

    def execute(self, field: FeatureField) -> FeatureSet:
        features = detect_nms(field, self.window_radius)
        if self.budget is not None:
            features = subsample_by_score(features, self.budget)
        return features


def make_detector(
    mode: str,
    cell_size: int = DEFAULT_CELL_SIZE,
    nms_radius: int = DEFAULT_NMS_RADIUS,
    budget: Optional[int] = None,
) -> DetectionStrategy:
    if mode == "grid":
        return GridArgmaxDetector(cell_size, budget)
    if mode == "nms":
        return NmsDetector(nms_radius, budget)
    raise InvalidArgumentError(f"Unknown detection mode '{mode}', expected one of {DETECTION_MODES}")
