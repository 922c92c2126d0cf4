from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from ..errors import InvalidArgumentError, ZeroBaselineError
from ..models.camera import CameraView

MIN_POSITIVE_DEPTH = 1e-9
MIN_BASELINE = 1e-12


class ReprojectionStatus(Enum):
    OK = "ok"
    NO_DEPTH = "no_depth"
    BEHIND_CAMERA = "behind_camera"


@dataclass(frozen=True, slots=True)
class Reprojection:
    """Target pixel of a reprojected point; coordinates are NaN unless status is OK."""

    x: float
    y: float
    status: ReprojectionStatus

    @property
    def valid(self) -> bool:
        return self.status is ReprojectionStatus.OK

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


def relative_pose(view_src: CameraView, view_dst: CameraView) -> Tuple[np.ndarray, np.ndarray]:
    """(R, t) mapping src camera coordinates to dst camera coordinates."""
    rotation = view_dst.rotation @ view_src.rotation.T
    translation = view_dst.translation - rotation @ view_src.translation
    return rotation, translation


def _pixel_arrays(xs, ys) -> Tuple[np.ndarray, np.ndarray]:
    xs = np.atleast_1d(np.asarray(xs, dtype=np.intp))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.intp))
    if xs.shape != ys.shape:
        raise InvalidArgumentError("Pixel coordinate arrays must have equal length")
    return xs, ys


def reproject_points(
    view_src: CameraView,
    view_dst: CameraView,
    xs: np.ndarray,
    ys: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized depth reprojection of integer pixels from src into dst.

    Returns:
        (points (n, 2) with NaN rows where unusable,
         has_depth (n,) bool, behind_camera (n,) bool)
        A point is usable when it has depth and is not behind the dst
        camera. Projections outside the dst image are still returned.
    """
    xs, ys = _pixel_arrays(xs, ys)
    if np.any((xs < 0) | (xs >= view_src.width) | (ys < 0) | (ys >= view_src.height)):
        raise InvalidArgumentError("Pixels must lie inside the source view")

    depth = view_src.depth[ys, xs]
    has_depth = view_src.depth_valid[ys, xs]
    safe_depth = np.where(has_depth, depth, 0.0)

    cam_src = np.column_stack([
        (xs - view_src.cx) / view_src.fx * safe_depth,
        (ys - view_src.cy) / view_src.fy * safe_depth,
        safe_depth,
    ])
    rotation, translation = relative_pose(view_src, view_dst)
    cam_dst = cam_src @ rotation.T + translation

    z = cam_dst[:, 2]
    in_front = z > MIN_POSITIVE_DEPTH
    usable = has_depth & in_front
    safe_z = np.where(usable, z, 1.0)

    points = np.column_stack([
        view_dst.fx * cam_dst[:, 0] / safe_z + view_dst.cx,
        view_dst.fy * cam_dst[:, 1] / safe_z + view_dst.cy,
    ])
    points[~usable] = np.nan
    return points, has_depth, has_depth & ~in_front


def reproject(view_src: CameraView, view_dst: CameraView, pixel: Tuple[int, int]) -> Reprojection:
    """Reproject a single pixel; reports NO_DEPTH or BEHIND_CAMERA instead of a location."""
    points, has_depth, behind = reproject_points(view_src, view_dst, [pixel[0]], [pixel[1]])
    if not has_depth[0]:
        return Reprojection(float("nan"), float("nan"), ReprojectionStatus.NO_DEPTH)
    if behind[0]:
        return Reprojection(float("nan"), float("nan"), ReprojectionStatus.BEHIND_CAMERA)
    return Reprojection(float(points[0, 0]), float(points[0, 1]), ReprojectionStatus.OK)


def skew(vector: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x."""
    x, y, z = np.asarray(vector, dtype=np.float64)
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def fundamental_matrix(view_src: CameraView, view_dst: CameraView) -> np.ndarray:
    """
    F with p_dst^T F p_src = 0 for corresponding homogeneous pixels.

    Raises:
        ZeroBaselineError: If the relative translation is (numerically) zero
    """
    rotation, translation = relative_pose(view_src, view_dst)
    if np.linalg.norm(translation) < MIN_BASELINE:
        raise ZeroBaselineError("Views share a camera center; epipolar geometry is undefined")
    essential = skew(translation) @ rotation
    return np.linalg.inv(view_dst.intrinsics).T @ essential @ np.linalg.inv(view_src.intrinsics)


def _homogeneous(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([points, np.ones(len(points))])


def _line_distances(lines: np.ndarray, points: np.ndarray) -> np.ndarray:
    """|l . p| / ||l[:2]|| for every (line, point) pair; 0 for degenerate lines."""
    numerators = np.abs(lines @ points.T)
    scale = np.hypot(lines[:, 0], lines[:, 1])[:, None]
    return np.divide(numerators, scale, out=np.zeros_like(numerators), where=scale > 0.0)


def epipolar_distances(fundamental: np.ndarray, points_src: np.ndarray, points_dst: np.ndarray) -> np.ndarray:
    """
    Symmetric epipolar distance matrix, shape (n_src, n_dst).

    Entry (i, j) is the larger of the distance from dst point j to the
    epipolar line of src point i and the distance from src point i to the
    epipolar line of dst point j, in pixels.
    """
    src = _homogeneous(points_src)
    dst = _homogeneous(points_dst)

    lines_in_dst = src @ fundamental.T
    lines_in_src = dst @ fundamental
    to_dst = _line_distances(lines_in_dst, dst)
    to_src = _line_distances(lines_in_src, src).T
    return np.maximum(to_dst, to_src)


def epipolar_distance(
    view_a: CameraView,
    view_b: CameraView,
    p_a: Tuple[float, float],
    p_b: Tuple[float, float],
) -> float:
    """
    Symmetric epipolar distance of one point pair.

    Raises:
        ZeroBaselineError: If the views share a camera center
    """
    fundamental = fundamental_matrix(view_a, view_b)
    return float(epipolar_distances(fundamental, [p_a], [p_b])[0, 0])
