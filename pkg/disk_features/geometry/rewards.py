from enum import IntEnum
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InvalidArgumentError, ZeroBaselineError
from ..models.camera import CameraView, Scene
from .projection import epipolar_distances, fundamental_matrix, reproject_points

SUPERVISION_MODES = ("depth", "epipolar")
DEFAULT_EPSILON = 2.0


class MatchLabel(IntEnum):
    CORRECT = 0
    PLAUSIBLE = 1
    INCORRECT = 2

    def reward(self, lambda_tp: float, lambda_fp: float) -> float:
        """Reward earned by a match with this label; plausible matches earn 0."""
        return reward_table(lambda_tp, lambda_fp)[int(self)]


def reward_table(lambda_tp: float, lambda_fp: float) -> np.ndarray:
    """Rewards indexed by MatchLabel value."""
    return np.array([lambda_tp, 0.0, lambda_fp], dtype=np.float64)


def reprojection_errors(
    view_a: CameraView,
    view_b: CameraView,
    points_a: np.ndarray,
    points_b: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Pixel errors of both reprojection directions for every (i, j) pair.

    Returns:
        (error A->B (n, m), error B->A (n, m), usable_a (n,), usable_b (m,))
        Errors are +inf where the corresponding point cannot be reprojected.
    """
    points_a = np.asarray(points_a, dtype=np.intp).reshape(-1, 2)
    points_b = np.asarray(points_b, dtype=np.intp).reshape(-1, 2)

    forward, depth_a, behind_a = reproject_points(view_a, view_b, points_a[:, 0], points_a[:, 1])
    backward, depth_b, behind_b = reproject_points(view_b, view_a, points_b[:, 0], points_b[:, 1])
    usable_a = depth_a & ~behind_a
    usable_b = depth_b & ~behind_b

    error_ab = np.full((len(points_a), len(points_b)), np.inf)
    error_ba = np.full((len(points_a), len(points_b)), np.inf)
    if len(points_b) and np.any(usable_a):
        error_ab[usable_a] = cdist(forward[usable_a], points_b.astype(np.float64))
    if len(points_a) and np.any(usable_b):
        error_ba[:, usable_b] = cdist(points_a.astype(np.float64), backward[usable_b])
    return error_ab, error_ba, usable_a, usable_b


def classify_pairs(
    view_a: CameraView,
    view_b: CameraView,
    points_a: np.ndarray,
    points_b: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
    supervision: str = "depth",
) -> np.ndarray:
    """
    Label every pair of pixels (points_a[i], points_b[j]) as a MatchLabel code.

    depth supervision: Correct when both pixels have depth and both
    reprojections land within epsilon; Plausible when depth is missing on
    either side (a point behind the other camera counts as missing) but the
    pair satisfies the epipolar constraint within epsilon; Incorrect
    otherwise. Without a baseline no pair can be Plausible.

    epipolar supervision: Correct iff the epipolar distance is within
    epsilon, Incorrect otherwise; a zero baseline makes every pair Incorrect.

    Returns:
        int8 matrix of shape (n, m)
    """
    if supervision not in SUPERVISION_MODES:
        raise InvalidArgumentError(f"Unknown supervision '{supervision}', expected one of {SUPERVISION_MODES}")
    if not epsilon >= 0.0:
        raise InvalidArgumentError(f"Epsilon must be non-negative, got {epsilon}")

    points_a = np.asarray(points_a, dtype=np.intp).reshape(-1, 2)
    points_b = np.asarray(points_b, dtype=np.intp).reshape(-1, 2)
    labels = np.full((len(points_a), len(points_b)), MatchLabel.INCORRECT, dtype=np.int8)
    if labels.size == 0:
        return labels

    try:
        epipolar_ok = epipolar_distances(fundamental_matrix(view_a, view_b), points_a, points_b) <= epsilon
    except ZeroBaselineError:
        epipolar_ok = None

    if supervision == "epipolar":
        if epipolar_ok is not None:
            labels[epipolar_ok] = MatchLabel.CORRECT
        return labels

    error_ab, error_ba, usable_a, usable_b = reprojection_errors(view_a, view_b, points_a, points_b)
    both_usable = usable_a[:, None] & usable_b[None, :]
    correct = both_usable & (error_ab <= epsilon) & (error_ba <= epsilon)

    if epipolar_ok is not None:
        labels[~both_usable & epipolar_ok] = MatchLabel.PLAUSIBLE
    labels[correct] = MatchLabel.CORRECT
    return labels


def classify_match(
    scene: Scene,
    view_a: int,
    view_b: int,
    p_a: Tuple[int, int],
    p_b: Tuple[int, int],
    epsilon: float = DEFAULT_EPSILON,
    supervision: str = "depth",
) -> MatchLabel:
    """Label of a single match between pixel p_a of view `view_a` and p_b of view `view_b`."""
    if not (0 <= view_a < len(scene) and 0 <= view_b < len(scene)):
        raise InvalidArgumentError(f"View indices ({view_a}, {view_b}) outside a {len(scene)}-view scene")
    labels = classify_pairs(scene.views[view_a], scene.views[view_b], [p_a], [p_b], epsilon, supervision)
    return MatchLabel(int(labels[0, 0]))
