"""Synthetic posed scenes of a single plane, with analytic depth."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import InvalidArgumentError
from ..models.camera import CameraView, Scene
from ..models.field import FeatureField
from .projection import reproject_points

SCENE_KINDS = ("fronto_planar", "tilted_plane")
MIN_SCENE_SIZE = 8
MAX_DEPTH_MASK_FRACTION = 0.9
MAX_PLANE_TILT_DEG = 25.0
VIEW_YAW_DEG = 2.0
PLANE_DISTANCE_RANGE = (1.0, 2.0)


@dataclass(frozen=True, slots=True)
class PlaneSpec:
    """Plane n . X = offset in world (= view A camera) coordinates."""

    normal: Tuple[float, float, float]
    offset: float


def _intrinsics(height: int, width: int) -> np.ndarray:
    focal = float(max(height, width))
    return np.array([
        [focal, 0.0, (width - 1) / 2.0],
        [0.0, focal, (height - 1) / 2.0],
        [0.0, 0.0, 1.0],
    ])


def plane_depth(
    intrinsics: np.ndarray,
    rotation: np.ndarray,
    translation: np.ndarray,
    plane: PlaneSpec,
    height: int,
    width: int,
) -> np.ndarray:
    """Camera-frame z of the plane at every pixel; 0 where the ray misses it."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    rays = np.stack([
        (xs - intrinsics[0, 2]) / intrinsics[0, 0],
        (ys - intrinsics[1, 2]) / intrinsics[1, 1],
        np.ones_like(xs),
    ], axis=-1)

    normal = np.asarray(plane.normal, dtype=np.float64)
    center = -rotation.T @ translation
    directions = rays @ rotation
    denominators = directions @ normal
    numerator = plane.offset - normal @ center

    with np.errstate(divide="ignore", invalid="ignore"):
        depth = numerator / denominators
    depth[~np.isfinite(depth) | (depth <= 0.0)] = 0.0
    return depth


def generate_toy_scene(
    kind: str = "fronto_planar",
    height: int = 64,
    width: int = 64,
    baseline: float = 0.1,
    depth_mask_fraction: float = 0.0,
    seed: int = 0,
    views: int = 2,
) -> Scene:
    """
    Two or three views of a textureless plane.

    View k sits at x = k * baseline (X_cam = R X_world + t with t = (k*b, 0, 0)
    for the fronto-parallel case). `tilted_plane` tilts the plane by a seeded
    angle and yaws the later cameras slightly. A seeded fraction of every
    depth map is replaced by the 0 sentinel.

    Raises:
        InvalidArgumentError: On unknown kind, size below 8, zero baseline,
            mask fraction outside [0, 0.9] or a view count other than 2 or 3
    """
    if kind not in SCENE_KINDS:
        raise InvalidArgumentError(f"Unknown scene kind '{kind}', expected one of {SCENE_KINDS}")
    if height < MIN_SCENE_SIZE or width < MIN_SCENE_SIZE:
        raise InvalidArgumentError(f"Scene must be at least {MIN_SCENE_SIZE}x{MIN_SCENE_SIZE}, got {height}x{width}")
    if not np.isfinite(baseline) or baseline == 0.0:
        raise InvalidArgumentError("Toy scenes need a non-zero baseline for parallax")
    if not 0.0 <= depth_mask_fraction <= MAX_DEPTH_MASK_FRACTION:
        raise InvalidArgumentError(
            f"Depth mask fraction must lie in [0, {MAX_DEPTH_MASK_FRACTION}], got {depth_mask_fraction}"
        )
    if views not in (2, 3):
        raise InvalidArgumentError(f"A toy scene has 2 or 3 views, got {views}")

    rng = np.random.default_rng(seed)
    offset = float(rng.uniform(*PLANE_DISTANCE_RANGE))
    if kind == "tilted_plane":
        tilt = rng.uniform(-MAX_PLANE_TILT_DEG, MAX_PLANE_TILT_DEG, size=2)
        normal = Rotation.from_euler("xy", tilt, degrees=True).apply([0.0, 0.0, 1.0])
    else:
        normal = np.array([0.0, 0.0, 1.0])
    plane = PlaneSpec(normal=tuple(float(v) for v in normal), offset=offset)

    intrinsics = _intrinsics(height, width)
    camera_views = []
    for k in range(views):
        if kind == "tilted_plane":
            rotation = Rotation.from_euler("y", k * VIEW_YAW_DEG, degrees=True).as_matrix()
        else:
            rotation = np.eye(3)
        translation = np.array([k * baseline, 0.0, 0.0])
        depth = plane_depth(intrinsics, rotation, translation, plane, height, width)
        if depth_mask_fraction > 0.0:
            depth[rng.random((height, width)) < depth_mask_fraction] = 0.0
        camera_views.append(CameraView(intrinsics, rotation, translation, depth))

    return Scene(tuple(camera_views))


def correspondences(scene: Scene, src: int, dst: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ground-truth pixel correspondences from view `src` to view `dst`.

    Every src pixel with depth is reprojected and rounded; pairs whose target
    falls outside the dst image or onto a dst pixel without depth are dropped.

    Returns:
        (pixels_src (k, 2), pixels_dst (k, 2)) as integer (x, y) rows
    """
    view_src, view_dst = scene.views[src], scene.views[dst]
    ys, xs = np.nonzero(view_src.depth_valid)
    points, has_depth, behind = reproject_points(view_src, view_dst, xs, ys)

    usable = has_depth & ~behind
    targets = np.full((len(xs), 2), -1, dtype=np.intp)
    targets[usable] = np.rint(points[usable]).astype(np.intp)
    inside = (
        usable
        & (targets[:, 0] >= 0) & (targets[:, 0] < view_dst.width)
        & (targets[:, 1] >= 0) & (targets[:, 1] < view_dst.height)
    )
    inside[inside] &= view_dst.depth_valid[targets[inside, 1], targets[inside, 0]]

    sources = np.column_stack([xs, ys])[inside]
    return sources.astype(np.intp), targets[inside]


def plant_oracle_fields(
    scene: Scene,
    count: int,
    n: int = 8,
    separation: int = 16,
    seed: int = 0,
) -> Tuple[FeatureField, ...]:
    """
    Fields that detect and match perfectly on `scene`.

    Picks up to `count` view-A pixels whose correspondences exist in every
    other view, at least `separation` pixels apart (Chebyshev) in every view,
    gives them a strong positive logit and a shared random descriptor, and
    leaves every other pixel negative with an independent random descriptor.
    """
    if count < 1:
        raise InvalidArgumentError(f"Oracle needs at least one planted point, got {count}")

    rng = np.random.default_rng(seed)
    height, width = scene.height, scene.width

    lookups = []
    for dst in range(1, len(scene)):
        sources, targets = correspondences(scene, 0, dst)
        lookup = np.full((height, width, 2), -1, dtype=np.intp)
        lookup[sources[:, 1], sources[:, 0]] = targets
        lookups.append(lookup)

    candidates = np.argwhere(np.all([lookup[..., 0] >= 0 for lookup in lookups], axis=0))
    candidates = candidates[rng.permutation(len(candidates))]

    planted = []
    for y, x in candidates:
        locations = [(x, y)] + [tuple(lookup[y, x]) for lookup in lookups]
        if all(
            max(abs(loc[0] - other[k][0]), abs(loc[1] - other[k][1])) >= separation
            for other in planted
            for k, loc in enumerate(locations)
        ):
            planted.append(locations)
        if len(planted) == count:
            break

    shared = rng.normal(size=(len(planted), n))
    fields = []
    for k in range(len(scene)):
        heatmap = np.full((height, width), -5.0)
        descriptors = rng.normal(size=(height, width, n))
        for index, locations in enumerate(planted):
            x, y = locations[k]
            heatmap[y, x] = 5.0
            descriptors[y, x] = shared[index]
        fields.append(FeatureField(heatmap=heatmap, descriptors=descriptors))
    return tuple(fields)
