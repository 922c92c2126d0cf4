from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import InvalidArgumentError

ORTHONORMAL_TOLERANCE = 1e-9


def _frozen(values: np.ndarray, shape: Tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.shape != shape:
        raise InvalidArgumentError(f"{name} must have shape {shape}, got {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CameraView:
    """
    Pinhole view with pose and depth map.

    Pose convention: X_cam = R @ X_world + t. Depth is the camera-frame z of the
    surface seen at each pixel; entries that are 0 (or non-finite) mark pixels
    without depth.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    depth: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "intrinsics", _frozen(self.intrinsics, (3, 3), "intrinsics"))
        object.__setattr__(self, "rotation", _frozen(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,), "translation"))

        depth = np.array(self.depth, dtype=np.float64, copy=True)
        if depth.ndim != 2 or min(depth.shape) < 1:
            raise InvalidArgumentError(f"Depth must be a non-empty 2-D grid, got shape {depth.shape}")
        depth.setflags(write=False)
        object.__setattr__(self, "depth", depth)

        rotation = self.rotation
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ORTHONORMAL_TOLERANCE, rtol=0.0):
            raise InvalidArgumentError("Rotation must be orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise InvalidArgumentError("Rotation must have determinant +1")

        k = self.intrinsics
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise InvalidArgumentError("Focal lengths must be positive")
        if k[0, 1] != 0 or k[1, 0] != 0 or k[2, 0] != 0 or k[2, 1] != 0 or k[2, 2] != 1:
            raise InvalidArgumentError("Intrinsics must be a zero-skew pinhole matrix")

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    @property
    def height(self) -> int:
        return int(self.depth.shape[0])

    @property
    def width(self) -> int:
        return int(self.depth.shape[1])

    @property
    def depth_valid(self) -> np.ndarray:
        """Boolean mask of pixels with usable depth (finite and > 0)."""
        return np.isfinite(self.depth) & (self.depth > 0.0)

    def has_depth(self, x: int, y: int) -> bool:
        return bool(self.depth_valid[y, x])

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True, eq=False)
class Scene:
    """Two or three posed views (A, B[, C]) of the same geometry."""

    views: Tuple[CameraView, ...]

    def __post_init__(self) -> None:
        views = tuple(self.views)
        if len(views) not in (2, 3):
            raise InvalidArgumentError(f"A scene has 2 or 3 views, got {len(views)}")
        shapes = {view.depth.shape for view in views}
        if len(shapes) != 1:
            raise InvalidArgumentError(f"All views must share pixel dimensions, got {sorted(shapes)}")
        object.__setattr__(self, "views", views)

    @property
    def height(self) -> int:
        return self.views[0].height

    @property
    def width(self) -> int:
        return self.views[0].width

    @property
    def is_triplet(self) -> bool:
        return len(self.views) == 3

    def pairs(self) -> List[Tuple[int, int]]:
        """View index pairs in fixed order: (0,1) or (0,1), (0,2), (1,2)."""
        n = len(self.views)
        return [(a, b) for a in range(n) for b in range(a + 1, n)]

    def __len__(self) -> int:
        return len(self.views)

    def __repr__(self) -> str:
        return f"Scene({len(self.views)} views, {self.height}x{self.width})"
