from .config import RewardConfig, DEFAULT_LAMBDA_TP, DEFAULT_LAMBDA_FP, DEFAULT_LAMBDA_KP
from .score import heatmap_score_grad, accumulate_score_grad
from .estimator import (
    LabelCounts, FieldGradient, GradientAccumulator,
    resolve_threads, pair_labels, reward_matrix, matching_reward, matching_gradients, leave_one_out_credit,
    keypoint_penalty, pair_gradient, scene_gradient, triplet_gradient,
)
from .gradcheck import (
    BlockError, GradcheckReport, GradcheckInstance,
    central_difference, relative_errors, random_instance, check_instance, run_gradcheck,
)

__all__ = [
    "RewardConfig", "DEFAULT_LAMBDA_TP", "DEFAULT_LAMBDA_FP", "DEFAULT_LAMBDA_KP",
    "heatmap_score_grad", "accumulate_score_grad",
    "LabelCounts", "FieldGradient", "GradientAccumulator",
    "resolve_threads", "pair_labels", "reward_matrix", "matching_reward", "matching_gradients",
    "leave_one_out_credit",
    "keypoint_penalty", "pair_gradient", "scene_gradient", "triplet_gradient",
    "BlockError", "GradcheckReport", "GradcheckInstance",
    "central_difference", "relative_errors", "random_instance", "check_instance", "run_gradcheck",
]
