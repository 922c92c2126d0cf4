from .projection import (
    Reprojection, ReprojectionStatus,
    relative_pose, reproject, reproject_points, skew,
    fundamental_matrix, epipolar_distance, epipolar_distances,
)
from .rewards import (
    MatchLabel, SUPERVISION_MODES, DEFAULT_EPSILON,
    reward_table, reprojection_errors, classify_pairs, classify_match,
)
from .scenes import SCENE_KINDS, PlaneSpec, generate_toy_scene, correspondences, plant_oracle_fields

__all__ = [
    "Reprojection", "ReprojectionStatus",
    "relative_pose", "reproject", "reproject_points", "skew",
    "fundamental_matrix", "epipolar_distance", "epipolar_distances",
    "MatchLabel", "SUPERVISION_MODES", "DEFAULT_EPSILON",
    "reward_table", "reprojection_errors", "classify_pairs", "classify_match",
    "SCENE_KINDS", "PlaneSpec", "generate_toy_scene", "correspondences", "plant_oracle_fields",
]
