"""Finite-difference verification of the exact matching gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import log_expit, log_softmax

from ..detection.grid import partition_grid
from ..detection.sampler import SampledDetections, sampled_at
from ..errors import InvalidArgumentError
from ..geometry.scenes import correspondences, generate_toy_scene
from ..models.camera import Scene
from ..models.field import FeatureField, init_field, raw_descriptors
from .config import RewardConfig
from .estimator import matching_reward, pair_gradient, reward_matrix
from .score import heatmap_score_grad

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DEFAULT_THETA_M = 2.0
ABSOLUTE_FLOOR = 1e-8
PASS_THRESHOLD = 1e-3
CANCELLATION_STEP = 1e-10


def central_difference(
    fn: Callable[[np.ndarray], float],
    x0: np.ndarray,
    step: float,
    extrapolate: bool = False,
) -> np.ndarray:
    """
    Central-difference gradient of a scalar function, one coordinate at a time.

    With `extrapolate`, combines steps h and h/2 (Richardson) so the
    truncation error drops from O(h^2) to O(h^4).
    """
    if extrapolate:
        coarse = central_difference(fn, x0, step)
        fine = central_difference(fn, x0, step / 2.0)
        return (4.0 * fine - coarse) / 3.0
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros(x0.size)
    for j in range(x0.size):
        x = x0.ravel().copy()
        x[j] = x0.flat[j] + step
        f_plus = fn(x.reshape(x0.shape))
        x[j] = x0.flat[j] - step
        f_minus = fn(x.reshape(x0.shape))
        grad[j] = (f_plus - f_minus) / (2.0 * step)
    return grad.reshape(x0.shape)


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABSOLUTE_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor) per component."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


@dataclass(frozen=True, slots=True)
class BlockError:
    name: str
    size: int
    max_rel_error: float
    mean_rel_error: float
    max_abs_error: float

    @classmethod
    def compare(cls, name: str, analytic: np.ndarray, numeric: np.ndarray) -> "BlockError":
        errors = relative_errors(analytic, numeric)
        return cls(
            name=name,
            size=int(errors.size),
            max_rel_error=float(errors.max()) if errors.size else 0.0,
            mean_rel_error=float(errors.mean()) if errors.size else 0.0,
            max_abs_error=float(np.max(np.abs(np.asarray(analytic) - np.asarray(numeric)))) if errors.size else 0.0,
        )

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "max_rel_error": self.max_rel_error,
            "mean_rel_error": self.mean_rel_error,
            "max_abs_error": self.max_abs_error,
        }


@dataclass(frozen=True)
class GradcheckReport:
    step: float
    instance: Dict[str, object]
    blocks: Tuple[BlockError, ...]
    threshold: float = PASS_THRESHOLD

    @property
    def max_rel_error(self) -> float:
        return max((block.max_rel_error for block in self.blocks), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold

    def block(self, name: str) -> BlockError:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "step": self.step,
            "blocks": {block.name: block.to_dict() for block in self.blocks},
            "max_rel_error": self.max_rel_error,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class GradcheckInstance:
    """Fixed fields, scene and sampled sets of one check."""

    scene: Scene
    fields: Tuple[FeatureField, FeatureField]
    sampled: Tuple[SampledDetections, SampledDetections]
    description: Dict[str, object] = field(default_factory=dict)


def random_instance(
    size: int = 16,
    n: int = 8,
    features: int = 4,
    seed: int = 0,
    cell_size: int = 4,
) -> GradcheckInstance:
    """
    Random two-view instance with a mix of correct, plausible and incorrect pairs.

    View A features sit at random pixels of distinct cells; about half of the
    view B features are placed on the ground-truth correspondence of an A
    feature and the rest at random free cells.

    Raises:
        InvalidArgumentError: If size < 2 * cell_size or the grid cannot hold the features
    """
    if size < 2 * cell_size:
        raise InvalidArgumentError(f"Instance size {size} must be at least twice the cell size {cell_size}")
    grid = partition_grid(size, size, cell_size)
    if not 1 <= features <= grid.num_cells:
        raise InvalidArgumentError(f"Feature count must lie in [1, {grid.num_cells}], got {features}")

    rng = np.random.default_rng(seed)
    scene = generate_toy_scene("fronto_planar", size, size, baseline=0.1, depth_mask_fraction=0.3, seed=seed)
    fields = (init_field(size, size, n, seed=seed), init_field(size, size, n, seed=seed + 1))

    def random_pixel(cell: int) -> Tuple[int, int]:
        region = grid.cells[cell]
        return region.local_to_global(int(rng.integers(region.size)))

    cells_a = rng.choice(grid.num_cells, size=features, replace=False)
    pixels_a = [random_pixel(int(cell)) for cell in cells_a]

    sources, targets = correspondences(scene, 0, 1)
    lookup = {tuple(src): tuple(dst) for src, dst in zip(sources.tolist(), targets.tolist())}

    pixels_b: List[Tuple[int, int]] = []
    used = set()
    for index, pixel in enumerate(pixels_a):
        target = lookup.get(pixel)
        if index % 2 == 0 and target is not None and grid.cell_of(*target) not in used:
            pixels_b.append(target)
            used.add(grid.cell_of(*target))
    free = [cell for cell in rng.permutation(grid.num_cells).tolist() if cell not in used]
    for cell in free[:features - len(pixels_b)]:
        pixels_b.append(random_pixel(cell))

    sampled = (sampled_at(fields[0], grid, pixels_a), sampled_at(fields[1], grid, pixels_b))
    description = {"size": size, "n": n, "features": features, "seed": seed, "cell_size": cell_size}
    return GradcheckInstance(scene=scene, fields=fields, sampled=sampled, description=description)


def check_instance(
    instance: GradcheckInstance,
    step: float = DEFAULT_STEP,
    theta_m: float = DEFAULT_THETA_M,
    cfg: Optional[RewardConfig] = None,
) -> GradcheckReport:
    """
    Compare pair_gradient with central differences of sum_ij P(i <-> j) r(i, j).

    Blocks: raw descriptors of A, raw descriptors of B, theta_m, and the
    log-probability gradient of the first sampled A feature's cell.
    """
    if step < CANCELLATION_STEP:
        logger.warning("Step %.1e is small enough for floating-point cancellation to dominate", step)
    cfg = cfg or RewardConfig(lambda_kp=0.0)

    field_a, field_b = instance.fields
    sampled_a, sampled_b = instance.sampled
    features_a, features_b = sampled_a.features, sampled_b.features

    gradient = pair_gradient(field_a, field_b, sampled_a, sampled_b, instance.scene, theta_m, cfg)
    rewards = reward_matrix(features_a, features_b, instance.scene, cfg)
    raw_a = raw_descriptors(field_a, features_a.xs, features_a.ys)
    raw_b = raw_descriptors(field_b, features_b.xs, features_b.ys)

    numeric_a = central_difference(
        lambda x: matching_reward(x, raw_b, theta_m, rewards), raw_a, step, extrapolate=True
    )
    numeric_b = central_difference(
        lambda x: matching_reward(raw_a, x, theta_m, rewards), raw_b, step, extrapolate=True
    )
    numeric_theta = central_difference(
        lambda t: matching_reward(raw_a, raw_b, float(t[0]), rewards),
        np.array([theta_m]), step, extrapolate=True,
    )

    analytic_a = gradient.for_view(0).d_descriptors[features_a.ys, features_a.xs]
    analytic_b = gradient.for_view(1).d_descriptors[features_b.ys, features_b.xs]
    blocks = [
        BlockError.compare("descriptors_a", analytic_a, numeric_a),
        BlockError.compare("descriptors_b", analytic_b, numeric_b),
        BlockError.compare("theta_m", np.array([gradient.d_theta_m]), numeric_theta),
    ]

    if len(features_a):
        grid = sampled_a.grid
        cell = grid.cells[int(sampled_a.cell_indices[0])]
        keypoint = features_a.keypoints[0]
        local = (keypoint.x - cell.x0, keypoint.y - cell.y0)
        cell_logits = cell.crop(field_a.heatmap).astype(np.float64)

        def log_prob(logits: np.ndarray) -> float:
            index = local[1] * logits.shape[1] + local[0]
            return float(log_softmax(logits.ravel())[index] + log_expit(logits.ravel()[index]))

        blocks.append(BlockError.compare(
            "heatmap_log_prob",
            heatmap_score_grad(cell_logits, local),
            central_difference(log_prob, cell_logits, step, extrapolate=True),
        ))

    report = GradcheckReport(
        step=step,
        instance={**instance.description, "theta_m": theta_m, "rewards": cfg.to_dict()},
        blocks=tuple(blocks),
    )
    logger.debug("Gradient check max relative error %.3e", report.max_rel_error)
    return report


def run_gradcheck(
    size: int = 16,
    n: int = 8,
    features: int = 4,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    cell_size: int = 4,
    theta_m: float = DEFAULT_THETA_M,
    cfg: Optional[RewardConfig] = None,
) -> GradcheckReport:
    """Build a random instance and check it."""
    instance = random_instance(size=size, n=n, features=features, seed=seed, cell_size=cell_size)
    return check_instance(instance, step=step, theta_m=theta_m, cfg=cfg)
