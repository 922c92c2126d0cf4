import logging

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.spatial.distance import cdist

from ..errors import InvalidArgumentError
from ..models.features import FeatureSet, Keypoint
from ..models.field import FeatureField, normalize_rows, raw_descriptors
from .grid import GridSpec

logger = logging.getLogger(__name__)

DEFAULT_NMS_RADIUS = 2


def _features_at(field: FeatureField, xs: np.ndarray, ys: np.ndarray) -> FeatureSet:
    raw = raw_descriptors(field, xs, ys).reshape(len(xs), field.descriptor_dim)
    descriptors, _ = normalize_rows(raw)
    keypoints = tuple(
        Keypoint(int(x), int(y), float(field.heatmap[y, x])) for x, y in zip(xs, ys)
    )
    return FeatureSet(field.width, field.height, keypoints, descriptors)


def detect_argmax(field: FeatureField, grid: GridSpec) -> FeatureSet:
    """
    Inference-time grid detection: argmax per cell, kept iff its logit is > 0.

    Ties resolve to the smallest row-major index.
    """
    if not grid.matches(field.height, field.width):
        raise InvalidArgumentError(
            f"Grid {grid.height}x{grid.width} does not match field {field.height}x{field.width}"
        )

    logits = grid.gather(field.heatmap)
    best = np.argmax(logits, axis=1)
    cells = np.arange(grid.num_cells)
    keep = logits[cells, best] > 0.0

    ys, xs = np.divmod(grid.pixel_table[cells[keep], best[keep]], field.width)
    return _features_at(field, xs, ys)


def detect_nms(field: FeatureField, window_radius: int = DEFAULT_NMS_RADIUS) -> FeatureSet:
    """
    Non-maximum suppression over the whole heatmap.

    A pixel survives when its logit is positive, no pixel within Chebyshev
    distance `window_radius` is larger, and no earlier (row-major) pixel in
    that window holds the same value.
    """
    if window_radius < 1:
        raise InvalidArgumentError(f"NMS radius must be at least 1, got {window_radius}")

    heatmap = field.heatmap.astype(np.float64)
    height, width = heatmap.shape
    radius = window_radius
    if radius >= max(height, width):
        logger.debug("NMS radius %d covers the whole %dx%d map", radius, height, width)
        radius = max(height, width)

    local_max = maximum_filter(heatmap, size=2 * radius + 1, mode="nearest")
    survivors = (heatmap >= local_max) & (heatmap > 0.0)

    padded = np.pad(heatmap, radius, mode="constant", constant_values=-np.inf)
    for dy in range(-radius, 1):
        dx_stop = 0 if dy == 0 else radius + 1
        for dx in range(-radius, dx_stop):
            earlier = padded[radius + dy:radius + dy + height, radius + dx:radius + dx + width]
            survivors &= earlier != heatmap

    ys, xs = np.nonzero(survivors)
    return _features_at(field, xs, ys)


def subsample_by_score(features: FeatureSet, budget: int) -> FeatureSet:
    """
    Keep the `budget` highest-scoring features, preserving their order.

    Equal scores prefer the smaller row-major pixel index.
    """
    if budget < 0:
        raise InvalidArgumentError(f"Budget must be non-negative, got {budget}")
    if budget >= len(features):
        return features

    ranking = np.lexsort((features.row_major_indices(), -features.scores))
    return features.subset(np.sort(ranking[:budget]))


def duplicate_fraction(features: FeatureSet, radius: float = 2.0) -> float:
    """Fraction of features with another feature within `radius` pixels (Chebyshev)."""
    if len(features) < 2:
        return 0.0
    distances = cdist(features.points, features.points, metric="chebyshev")
    np.fill_diagonal(distances, np.inf)
    return float(np.mean(distances.min(axis=1) <= radius))
