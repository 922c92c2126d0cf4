from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..detection.base import make_detector
from ..errors import InvalidArgumentError
from ..geometry.rewards import MatchLabel, classify_pairs, reprojection_errors
from ..matching.distribution import distance_matrix
from ..matching.inference import match_inference
from ..models.camera import Scene
from ..models.field import FeatureField
from .config import EvalConfig

MMA_THRESHOLDS = tuple(range(1, 11))


@dataclass(frozen=True)
class EvalReport:
    """
    Match quality of the inference pipeline on one view pair.

    precision = Correct / (Correct + Incorrect) over inference matches, 1.0
    with `zero_match` set when nothing could be scored. recall = Correct /
    number of view-A keypoints for which some detected view-B keypoint is a
    Correct partner. mma[t - 1] is the fraction of matches with a two-way
    reprojection whose A->B error is at most t pixels.

    Training runs fill in the checkpoint fields (step onwards).
    """

    mode: str
    precision: float
    recall: float
    n_matches: int
    n_correct: int
    n_plausible: int
    n_incorrect: int
    n_keypoints_a: int
    n_keypoints_b: int
    zero_match: bool
    mean_reproj_err: Optional[float]
    mma: Tuple[float, ...]
    mma_auc5: float
    step: Optional[int] = None
    expected_reward: Optional[float] = None
    sampled_keypoints: Optional[int] = None
    theta_m: Optional[float] = None
    lambda_fp_eff: Optional[float] = None
    lambda_kp_eff: Optional[float] = None
    duplicate_fraction: Optional[float] = None

    def at_checkpoint(self, **values) -> "EvalReport":
        return replace(self, **values)

    @property
    def n_keypoints(self) -> int:
        return self.n_keypoints_a + self.n_keypoints_b

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "precision": self.precision,
            "recall": self.recall,
            "n_matches": self.n_matches,
            "n_correct": self.n_correct,
            "n_plausible": self.n_plausible,
            "n_incorrect": self.n_incorrect,
            "n_keypoints_a": self.n_keypoints_a,
            "n_keypoints_b": self.n_keypoints_b,
            "zero_match": self.zero_match,
            "mean_reproj_err": self.mean_reproj_err,
            "mma": {str(t): value for t, value in zip(MMA_THRESHOLDS, self.mma)},
            "mma_auc5": self.mma_auc5,
            "step": self.step,
            "expected_reward": self.expected_reward,
            "sampled_keypoints": self.sampled_keypoints,
            "theta_m": self.theta_m,
            "lambda_fp_eff": self.lambda_fp_eff,
            "lambda_kp_eff": self.lambda_kp_eff,
            "duplicate_fraction": self.duplicate_fraction,
        }

    def csv_row(self) -> dict:
        return {
            "step": self.step,
            "expected_reward": self.expected_reward,
            "theta_m": self.theta_m,
            "lambda_fp_eff": self.lambda_fp_eff,
            "lambda_kp_eff": self.lambda_kp_eff,
            "n_keypoints": self.sampled_keypoints,
            "precision": self.precision,
            "recall": self.recall,
            "mean_reproj_err": "" if self.mean_reproj_err is None else self.mean_reproj_err,
        }


def _pair_fields(
    fields: Union[FeatureField, Sequence[FeatureField]],
    scene: Scene,
    views: Tuple[int, int],
) -> Tuple[FeatureField, FeatureField]:
    if isinstance(fields, FeatureField):
        field_list = [fields] * len(scene)
    else:
        field_list = list(fields)
    if len(field_list) == 1:
        field_list = field_list * len(scene)
    if len(field_list) != len(scene):
        raise InvalidArgumentError(f"Expected 1 or {len(scene)} fields, got {len(field_list)}")
    for feature_field in field_list:
        if feature_field.shape != (scene.height, scene.width):
            raise InvalidArgumentError(
                f"Field {feature_field.height}x{feature_field.width} does not match scene "
                f"{scene.height}x{scene.width}"
            )
    return field_list[views[0]], field_list[views[1]]


def evaluate_matches(
    fields: Union[FeatureField, Sequence[FeatureField]],
    scene: Scene,
    config: Optional[EvalConfig] = None,
    views: Tuple[int, int] = (0, 1),
) -> EvalReport:
    """
    Detect on both views, match with the inference matcher and score against the scene.

    Args:
        fields: One shared field or one field per view
        scene: Posed views with depth
        config: Detection mode, ratio threshold, epsilon and keypoint budget
            (defaults: NMS, 0.95, 2 px, one keypoint per training cell)
        views: View pair to evaluate

    Raises:
        InvalidArgumentError: If a field does not fit the scene
    """
    config = config or EvalConfig()
    field_a, field_b = _pair_fields(fields, scene, views)
    view_a, view_b = scene.views[views[0]], scene.views[views[1]]

    detector = make_detector(
        config.mode,
        cell_size=config.cell_size,
        nms_radius=config.nms_radius,
        budget=config.keypoint_budget(field_a.height, field_a.width),
    )
    features_a = detector.execute(field_a)
    features_b = detector.execute(field_b)

    if len(features_a) and len(features_b):
        matches = match_inference(distance_matrix(features_a, features_b), config.ratio_threshold)
    else:
        matches = None

    labels = classify_pairs(
        view_a, view_b, features_a.points, features_b.points, config.epsilon, config.supervision
    )
    recoverable = int(np.count_nonzero(np.any(labels == MatchLabel.CORRECT, axis=1))) if labels.size else 0

    if matches is not None and len(matches):
        rows = np.array([i for i, _ in matches.pairs], dtype=np.intp)
        cols = np.array([j for _, j in matches.pairs], dtype=np.intp)
        match_labels = labels[rows, cols]
        error_ab, error_ba, _, _ = reprojection_errors(view_a, view_b, features_a.points, features_b.points)
        errors = error_ab[rows, cols]
        errors = errors[np.isfinite(errors) & np.isfinite(error_ba[rows, cols])]
    else:
        match_labels = np.zeros(0, dtype=np.int8)
        errors = np.zeros(0)

    n_correct = int(np.count_nonzero(match_labels == MatchLabel.CORRECT))
    n_plausible = int(np.count_nonzero(match_labels == MatchLabel.PLAUSIBLE))
    n_incorrect = int(np.count_nonzero(match_labels == MatchLabel.INCORRECT))
    scored = n_correct + n_incorrect

    if errors.size:
        mma = tuple(float(np.mean(errors <= t)) for t in MMA_THRESHOLDS)
        mean_error: Optional[float] = float(errors.mean())
    else:
        mma = tuple(0.0 for _ in MMA_THRESHOLDS)
        mean_error = None

    return EvalReport(
        mode=config.mode,
        precision=n_correct / scored if scored else 1.0,
        recall=n_correct / recoverable if recoverable else 0.0,
        n_matches=len(match_labels),
        n_correct=n_correct,
        n_plausible=n_plausible,
        n_incorrect=n_incorrect,
        n_keypoints_a=len(features_a),
        n_keypoints_b=len(features_b),
        zero_match=scored == 0,
        mean_reproj_err=mean_error,
        mma=mma,
        mma_auc5=float(np.mean(mma[:5])),
    )
