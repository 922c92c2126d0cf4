"""
disk_features: probabilistic local-feature detection and matching trained with policy gradients.

Layers:
    models      FeatureField, FeatureSet, CameraView, Scene
    io          DSKF tensor files and JSON artifacts
    detection   grid sampling (training) and argmax / NMS detection (inference)
    matching    distance matrix, relaxed match distribution, inference matcher
    geometry    reprojection, epipolar distance, match labels, toy scenes
    gradient    reward matrix, policy-gradient estimator, finite-difference checks
    trainer     ADAM, schedules, evaluation, training loop
    logging     TrainingLogger
    ui          static matplotlib figures
"""

from .errors import (
    DiskError, InvalidArgumentError, DegenerateDescriptorError,
    FieldFormatError, ZeroBaselineError, NonFiniteGradientError,
)
from .models import (
    FeatureField, init_field, normalized_descriptor,
    Keypoint, FeatureSet,
    CameraView, Scene,
)
from .detection import (
    GridSpec, partition_grid, SampledDetections, sample_features,
    detect_argmax, detect_nms, make_detector,
)
from .matching import (
    DistanceMatrix, MatchDistribution, MatchSet,
    distance_matrix, match_prob_pair, expected_reward, sample_matches, match_inference,
)
from .geometry import (
    MatchLabel, reproject, epipolar_distance, classify_match, generate_toy_scene,
)
from .gradient import (
    RewardConfig, GradientAccumulator,
    pair_gradient, triplet_gradient, heatmap_score_grad, reward_matrix, run_gradcheck,
)
from .trainer import (
    TrainConfig, EvalReport, DiskTrainer, TrainingController,
    adam_update, anneal, train_toy, evaluate_matches,
)
from .logging import TrainingLogger

__version__ = "0.1.0"

__all__ = [
    "DiskError", "InvalidArgumentError", "DegenerateDescriptorError",
    "FieldFormatError", "ZeroBaselineError", "NonFiniteGradientError",
    "FeatureField", "init_field", "normalized_descriptor",
    "Keypoint", "FeatureSet",
    "CameraView", "Scene",
    "GridSpec", "partition_grid", "SampledDetections", "sample_features",
    "detect_argmax", "detect_nms", "make_detector",
    "DistanceMatrix", "MatchDistribution", "MatchSet",
    "distance_matrix", "match_prob_pair", "expected_reward", "sample_matches", "match_inference",
    "MatchLabel", "reproject", "epipolar_distance", "classify_match", "generate_toy_scene",
    "RewardConfig", "GradientAccumulator",
    "pair_gradient", "triplet_gradient", "heatmap_score_grad", "reward_matrix", "run_gradcheck",
    "TrainConfig", "EvalReport", "DiskTrainer", "TrainingController",
    "adam_update", "anneal", "train_toy", "evaluate_matches",
    "TrainingLogger",
    "__version__",
]
