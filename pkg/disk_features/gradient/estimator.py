"""
Policy-gradient estimator of the expected match reward.

For fixed sampled features the matching term sum_ij P(i <-> j) r(i, j) is
differentiated exactly with respect to descriptors and theta_m. The feature
sampling is handled with score-function terms on the heatmap logits: every
sampled feature's log-probability gradient is weighted by its leave-one-out
credit, the matching reward minus the matching reward of the same sets with
that feature removed, plus the keypoint penalty. The reward without a feature
does not depend on its cell's outcome, so the weight is an unbiased baseline
and rejected cells contribute nothing. Gradients point uphill.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from ..detection.sampler import SampledDetections
from ..errors import InvalidArgumentError
from ..geometry.rewards import MatchLabel, classify_pairs, reward_table
from ..models.camera import Scene
from ..models.features import FeatureSet
from ..models.field import FeatureField, normalize_rows, raw_descriptors
from .config import RewardConfig
from .score import accumulate_score_grad

logger = logging.getLogger(__name__)

THREADS_ENV = "DISK_THREADS"


@dataclass(frozen=True, slots=True)
class LabelCounts:
    correct: int = 0
    plausible: int = 0
    incorrect: int = 0

    def __add__(self, other: "LabelCounts") -> "LabelCounts":
        return LabelCounts(
            self.correct + other.correct,
            self.plausible + other.plausible,
            self.incorrect + other.incorrect,
        )

    @property
    def total(self) -> int:
        return self.correct + self.plausible + self.incorrect


@dataclass(frozen=True, eq=False)
class FieldGradient:
    """Ascent direction for one field: d/dheatmap and d/draw-descriptors (float64)."""

    d_heatmap: np.ndarray
    d_descriptors: np.ndarray

    @classmethod
    def zeros_like(cls, feature_field: FeatureField) -> "FieldGradient":
        return cls(
            np.zeros(feature_field.heatmap.shape),
            np.zeros(feature_field.descriptors.shape),
        )

    def __add__(self, other: "FieldGradient") -> "FieldGradient":
        return FieldGradient(self.d_heatmap + other.d_heatmap, self.d_descriptors + other.d_descriptors)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.d_heatmap)) and np.all(np.isfinite(self.d_descriptors)))


@dataclass
class GradientAccumulator:
    """
    Gradients and diagnostics of one or more pair evaluations.

    `gradients` is keyed by view index; label counts are kept per view pair
    and keypoint counts per view.
    """

    gradients: Dict[int, FieldGradient] = field(default_factory=dict)
    d_theta_m: float = 0.0
    expected_reward: float = 0.0
    label_counts: Dict[Tuple[int, int], LabelCounts] = field(default_factory=dict)
    keypoints: Dict[int, int] = field(default_factory=dict)

    def add_field_gradient(self, view: int, gradient: FieldGradient) -> None:
        if view in self.gradients:
            self.gradients[view] = self.gradients[view] + gradient
        else:
            self.gradients[view] = gradient

    def merge(self, other: "GradientAccumulator") -> "GradientAccumulator":
        """Add `other` into this accumulator in place and return self."""
        for view, gradient in other.gradients.items():
            self.add_field_gradient(view, gradient)
        self.d_theta_m += other.d_theta_m
        self.expected_reward += other.expected_reward
        for pair, counts in other.label_counts.items():
            self.label_counts[pair] = self.label_counts.get(pair, LabelCounts()) + counts
        for view, count in other.keypoints.items():
            self.keypoints[view] = max(self.keypoints.get(view, 0), count)
        return self

    def for_view(self, view: int) -> FieldGradient:
        return self.gradients[view]

    @property
    def d_heatmap(self) -> np.ndarray:
        """Heatmap gradient summed over all views (the shared-field gradient)."""
        return self.total().d_heatmap

    @property
    def d_descriptors(self) -> np.ndarray:
        return self.total().d_descriptors

    def total(self) -> FieldGradient:
        views = sorted(self.gradients)
        if not views:
            raise InvalidArgumentError("Accumulator holds no field gradients")
        result = self.gradients[views[0]]
        for view in views[1:]:
            result = result + self.gradients[view]
        return result

    def counts(self) -> LabelCounts:
        result = LabelCounts()
        for pair in sorted(self.label_counts):
            result = result + self.label_counts[pair]
        return result

    @property
    def total_keypoints(self) -> int:
        return sum(self.keypoints.values())

    def is_finite(self) -> bool:
        return (
            bool(np.isfinite(self.d_theta_m) and np.isfinite(self.expected_reward))
            and all(gradient.is_finite() for gradient in self.gradients.values())
        )


def resolve_threads() -> int:
    """
    Worker count for pair evaluation from DISK_THREADS.

    Unset or 0 means one worker per CPU; 1 evaluates pairs serially.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{THREADS_ENV} must be an integer, got '{raw}'") from None
    if threads < 0:
        raise InvalidArgumentError(f"{THREADS_ENV} must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def pair_labels(
    features_a: FeatureSet,
    features_b: FeatureSet,
    scene: Scene,
    cfg: RewardConfig,
    view_a: int = 0,
    view_b: int = 1,
) -> np.ndarray:
    """MatchLabel code of every (i, j) feature pair."""
    return classify_pairs(
        scene.views[view_a],
        scene.views[view_b],
        features_a.points.astype(np.intp),
        features_b.points.astype(np.intp),
        cfg.epsilon,
        cfg.supervision,
    )


def reward_matrix(
    features_a: FeatureSet,
    features_b: FeatureSet,
    scene: Scene,
    cfg: RewardConfig,
    view_a: int = 0,
    view_b: int = 1,
) -> np.ndarray:
    """r(i, j): lambda_tp for Correct, lambda_fp for Incorrect, 0 for Plausible pairs."""
    labels = pair_labels(features_a, features_b, scene, cfg, view_a, view_b)
    return reward_table(cfg.lambda_tp, cfg.lambda_fp)[labels]


def matching_reward(raw_a: np.ndarray, raw_b: np.ndarray, theta_m: float, rewards: np.ndarray) -> float:
    """sum_ij P(i <-> j) r(i, j) as a function of raw descriptor rows."""
    unit_a, _ = normalize_rows(raw_a)
    unit_b, _ = normalize_rows(raw_b)
    scores = -theta_m * cdist(unit_a, unit_b)
    probabilities = softmax(scores, axis=1) * softmax(scores, axis=0)
    return float(np.sum(probabilities * rewards))


def _project_to_raw(d_unit: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Chain rule through v -> v / ||v||: (I - u u^T) g / ||v||."""
    radial = np.sum(d_unit * unit, axis=1, keepdims=True)
    return (d_unit - radial * unit) / norms[:, None]


def matching_gradients(
    raw_a: np.ndarray,
    raw_b: np.ndarray,
    theta_m: float,
    rewards: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray, float]:
    """
    Exact gradient of sum_ij P(i <-> j) r(i, j).

    With s = -theta_m * d, P = P_f * P_r and G = P * r the derivative with
    respect to s is 2G - P_f * rowsum(G) - P_r * colsum(G). Zero distances
    take the subgradient 0.

    Returns:
        (value, d_raw_a, d_raw_b, d_theta_m)
    """
    unit_a, norms_a = normalize_rows(raw_a)
    unit_b, norms_b = normalize_rows(raw_b)
    distances = cdist(unit_a, unit_b)
    scores = -theta_m * distances

    forward = softmax(scores, axis=1)
    reverse = softmax(scores, axis=0)
    weighted = forward * reverse * rewards
    row_mass = weighted.sum(axis=1)
    col_mass = weighted.sum(axis=0)

    d_scores = 2.0 * weighted - forward * row_mass[:, None] - reverse * col_mass[None, :]
    d_theta = float(np.sum(d_scores * -distances))
    d_distances = -theta_m * d_scores

    w = np.divide(d_distances, distances, out=np.zeros_like(distances), where=distances > 0.0)
    d_unit_a = unit_a * w.sum(axis=1)[:, None] - w @ unit_b
    d_unit_b = unit_b * w.sum(axis=0)[:, None] - w.T @ unit_a

    return (
        float(weighted.sum()),
        _project_to_raw(d_unit_a, unit_a, norms_a),
        _project_to_raw(d_unit_b, unit_b, norms_b),
        d_theta,
    )


def _rewards_without_each_row(scores: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """Matching reward of the sets with row i dropped, for every i."""
    n_rows = scores.shape[0]
    if n_rows < 2:
        return np.zeros(n_rows)
    # Dropping a row leaves the other rows' forward distributions unchanged.
    forward = softmax(scores, axis=1)
    remaining = np.empty(n_rows)
    for i in range(n_rows):
        keep = np.arange(n_rows) != i
        reverse = softmax(scores[keep], axis=0)
        remaining[i] = np.sum(forward[keep] * reverse * rewards[keep])
    return remaining


def leave_one_out_credit(
    raw_a: np.ndarray,
    raw_b: np.ndarray,
    theta_m: float,
    rewards: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Matching reward each feature adds to its pair: R - R(without the feature).

    A side with a single feature gets the whole reward. The removed reward is
    recomputed by softmax over the remaining candidates, never by subtracting
    probabilities, so a feature that dominates a column stays accurate.

    Returns:
        (credit per A feature, credit per B feature)
    """
    unit_a, _ = normalize_rows(raw_a)
    unit_b, _ = normalize_rows(raw_b)
    scores = -theta_m * cdist(unit_a, unit_b)
    value = np.sum(softmax(scores, axis=1) * softmax(scores, axis=0) * rewards)
    credit_a = value - _rewards_without_each_row(scores, rewards)
    credit_b = value - _rewards_without_each_row(scores.T, rewards.T)
    return credit_a, credit_b


def _check_inputs(feature_field: FeatureField, sampled: SampledDetections, scene: Scene) -> None:
    if not sampled.features.is_sampled:
        raise InvalidArgumentError("Gradient estimation needs sampled features with log-probabilities")
    if feature_field.shape != (scene.height, scene.width):
        raise InvalidArgumentError(
            f"Field {feature_field.height}x{feature_field.width} does not match scene {scene.height}x{scene.width}"
        )


def _label_counts(labels: np.ndarray) -> LabelCounts:
    counts = np.bincount(labels.ravel(), minlength=len(MatchLabel))
    return LabelCounts(
        int(counts[MatchLabel.CORRECT]),
        int(counts[MatchLabel.PLAUSIBLE]),
        int(counts[MatchLabel.INCORRECT]),
    )


def keypoint_penalty(
    feature_field: FeatureField,
    sampled: SampledDetections,
    lambda_kp: float,
    view: int = 0,
) -> GradientAccumulator:
    """lambda_kp per sampled keypoint and its score-function gradient."""
    gradient = FieldGradient.zeros_like(feature_field)
    accumulate_score_grad(
        gradient.d_heatmap, feature_field.heatmap, sampled, np.full(len(sampled), lambda_kp)
    )
    return GradientAccumulator(
        gradients={view: gradient},
        expected_reward=lambda_kp * len(sampled),
        keypoints={view: len(sampled)},
    )


def pair_gradient(
    field_a: FeatureField,
    field_b: FeatureField,
    sampled_a: SampledDetections,
    sampled_b: SampledDetections,
    scene: Scene,
    theta_m: float,
    cfg: RewardConfig,
    views: Tuple[int, int] = (0, 1),
    keypoint_penalty_applied: bool = True,
) -> GradientAccumulator:
    """
    Gradient of the expected reward of one image pair for fixed sampled features.

    Descriptor and theta_m gradients are exact; heatmap gradients are
    score-function terms weighted by each feature's leave-one-out credit
    (plus lambda_kp when `keypoint_penalty_applied`). No match is ever sampled, so
    repeated calls are bit-identical.

    Raises:
        InvalidArgumentError: If a sampled set has no log-probabilities or a
            field does not fit the scene
    """
    _check_inputs(field_a, sampled_a, scene)
    _check_inputs(field_b, sampled_b, scene)
    view_a, view_b = views

    features_a, features_b = sampled_a.features, sampled_b.features
    grad_a = FieldGradient.zeros_like(field_a)
    grad_b = FieldGradient.zeros_like(field_b)
    result = GradientAccumulator(keypoints={view_a: len(features_a), view_b: len(features_b)})

    lambda_kp = cfg.lambda_kp if keypoint_penalty_applied else 0.0
    credit_a = np.zeros(len(features_a))
    credit_b = np.zeros(len(features_b))

    if len(features_a) and len(features_b):
        labels = pair_labels(features_a, features_b, scene, cfg, view_a, view_b)
        rewards = reward_table(cfg.lambda_tp, cfg.lambda_fp)[labels]
        raw_a = raw_descriptors(field_a, features_a.xs, features_a.ys)
        raw_b = raw_descriptors(field_b, features_b.xs, features_b.ys)
        value, d_raw_a, d_raw_b, d_theta = matching_gradients(raw_a, raw_b, theta_m, rewards)
        credit_a, credit_b = leave_one_out_credit(raw_a, raw_b, theta_m, rewards)
        np.add.at(grad_a.d_descriptors, (features_a.ys, features_a.xs), d_raw_a)
        np.add.at(grad_b.d_descriptors, (features_b.ys, features_b.xs), d_raw_b)
        result.expected_reward = value
        result.d_theta_m = d_theta
        result.label_counts[(view_a, view_b)] = _label_counts(labels)
    else:
        result.label_counts[(view_a, view_b)] = LabelCounts()

    accumulate_score_grad(grad_a.d_heatmap, field_a.heatmap, sampled_a, credit_a + lambda_kp)
    accumulate_score_grad(grad_b.d_heatmap, field_b.heatmap, sampled_b, credit_b + lambda_kp)
    result.expected_reward += lambda_kp * (len(features_a) + len(features_b))

    result.add_field_gradient(view_a, grad_a)
    result.add_field_gradient(view_b, grad_b)
    return result


def _as_field_list(fields: Union[FeatureField, Sequence[FeatureField]], count: int) -> List[FeatureField]:
    if isinstance(fields, FeatureField):
        return [fields] * count
    fields = list(fields)
    if len(fields) != count:
        raise InvalidArgumentError(f"Expected {count} fields (or one shared field), got {len(fields)}")
    return fields


def scene_gradient(
    fields: Union[FeatureField, Sequence[FeatureField]],
    sampled: Sequence[SampledDetections],
    scene: Scene,
    theta_m: float,
    cfg: RewardConfig,
    threads: Optional[int] = None,
) -> GradientAccumulator:
    """
    Sum of pair gradients over every view pair of the scene, penalty once per image.

    Pairs may be evaluated on a thread pool; results are reduced in the fixed
    pair order so the sum does not depend on scheduling.
    """
    field_list = _as_field_list(fields, len(scene))
    if len(sampled) != len(scene):
        raise InvalidArgumentError(f"Expected {len(scene)} sampled sets, got {len(sampled)}")

    pairs = scene.pairs()
    workers = min(resolve_threads() if threads is None else threads, len(pairs))

    def evaluate(pair: Tuple[int, int]) -> GradientAccumulator:
        a, b = pair
        return pair_gradient(
            field_list[a], field_list[b], sampled[a], sampled[b], scene, theta_m, cfg,
            views=(a, b), keypoint_penalty_applied=False,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(evaluate, pairs))
    else:
        partials = [evaluate(pair) for pair in pairs]

    result = GradientAccumulator()
    for partial in partials:
        result.merge(partial)
    for view, feature_field in enumerate(field_list):
        result.merge(keypoint_penalty(feature_field, sampled[view], cfg.lambda_kp, view))

    logger.debug(
        "Scene gradient over %d pairs: E[R]=%.6f, %d keypoints",
        len(pairs), result.expected_reward, result.total_keypoints,
    )
    return result


def triplet_gradient(
    fields: Union[FeatureField, Sequence[FeatureField]],
    sampled: Sequence[SampledDetections],
    scene: Scene,
    theta_m: float,
    cfg: RewardConfig,
    threads: Optional[int] = None,
) -> GradientAccumulator:
    """
    Accumulated gradient of the pairs A-B, A-C, B-C.

    Raises:
        InvalidArgumentError: If the scene does not have three views
    """
    if not scene.is_triplet or len(sampled) != 3:
        raise InvalidArgumentError("Triplet gradient needs a 3-view scene and three sampled sets")
    return scene_gradient(fields, sampled, scene, theta_m, cfg, threads)
