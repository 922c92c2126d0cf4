from dataclasses import dataclass, field, replace
from typing import Optional

from ..detection.base import DETECTION_MODES
from ..detection.detectors import DEFAULT_NMS_RADIUS
from ..detection.grid import DEFAULT_CELL_SIZE, partition_grid
from ..errors import InvalidArgumentError
from ..geometry.rewards import DEFAULT_EPSILON, SUPERVISION_MODES
from ..gradient.config import RewardConfig
from ..matching.inference import DEFAULT_RATIO_THRESHOLD

DEFAULT_STEPS = 2000
DEFAULT_LR = 2e-2
DEFAULT_TOY_DESCRIPTOR_DIM = 8


@dataclass(frozen=True, slots=True)
class ScheduleConfig:
    """Linear theta_m ramp; ramp_steps None means half of the training steps."""

    theta_start: float = 15.0
    theta_end: float = 50.0
    ramp_steps: Optional[int] = None

    def __post_init__(self) -> None:
        if not (self.theta_start > 0.0 and self.theta_end > 0.0):
            raise InvalidArgumentError("theta_m schedule values must be positive")
        if self.ramp_steps is not None and self.ramp_steps < 0:
            raise InvalidArgumentError(f"theta_m ramp must be >= 0 steps, got {self.ramp_steps}")


@dataclass(frozen=True, slots=True)
class EvalConfig:
    """
    Inference-regime evaluation: detection mode, matcher ratio and the correctness threshold.

    Detections are capped at `budget` top-scoring keypoints per view. With no
    explicit budget and `cell_budget` set, the cap is the number of training
    cells, so NMS returns as many keypoints as the grid could at most.
    """

    mode: str = "nms"
    ratio_threshold: float = DEFAULT_RATIO_THRESHOLD
    epsilon: float = DEFAULT_EPSILON
    nms_radius: int = DEFAULT_NMS_RADIUS
    cell_size: int = DEFAULT_CELL_SIZE
    supervision: str = "depth"
    budget: Optional[int] = None
    cell_budget: bool = True

    def __post_init__(self) -> None:
        if self.mode not in DETECTION_MODES:
            raise InvalidArgumentError(f"Unknown detection mode '{self.mode}', expected one of {DETECTION_MODES}")
        if not 0.0 <= self.ratio_threshold <= 1.0:
            raise InvalidArgumentError(f"Ratio threshold must lie in [0, 1], got {self.ratio_threshold}")
        if not self.epsilon >= 0.0:
            raise InvalidArgumentError(f"Epsilon must be non-negative, got {self.epsilon}")
        if self.nms_radius < 1 or self.cell_size < 1:
            raise InvalidArgumentError("NMS radius and cell size must be at least 1")
        if self.supervision not in SUPERVISION_MODES:
            raise InvalidArgumentError(f"Unknown supervision '{self.supervision}'")
        if self.budget is not None and self.budget < 0:
            raise InvalidArgumentError(f"Keypoint budget must be non-negative, got {self.budget}")

    def keypoint_budget(self, height: int, width: int) -> Optional[int]:
        """Per-view keypoint cap for a height x width field, None for no cap."""
        if self.budget is not None:
            return self.budget
        if self.cell_budget:
            return partition_grid(height, width, self.cell_size).num_cells
        return None


@dataclass(frozen=True, slots=True)
class TrainConfig:
    """
    Hyperparameters of a toy training run.

    `anneal_steps` and `schedule.ramp_steps` default to a sixth and a half of
    `steps`; call `resolved()` to fill them in.
    """

    steps: int = DEFAULT_STEPS
    lr: float = DEFAULT_LR
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    h: int = DEFAULT_CELL_SIZE
    n: int = DEFAULT_TOY_DESCRIPTOR_DIM
    rewards: RewardConfig = field(default_factory=RewardConfig)
    anneal_steps: Optional[int] = None
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    seed: int = 0
    eval_interval: int = 100
    eval_samples: int = 4
    batch_size: int = 1
    shared_field: bool = False
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    out_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise InvalidArgumentError(f"Step count must be >= 0, got {self.steps}")
        if not self.lr > 0.0:
            raise InvalidArgumentError(f"Learning rate must be positive, got {self.lr}")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise InvalidArgumentError("ADAM betas must lie in [0, 1)")
        if not self.adam_eps > 0.0:
            raise InvalidArgumentError(f"ADAM eps must be positive, got {self.adam_eps}")
        if self.h < 1 or self.n < 1:
            raise InvalidArgumentError(f"Cell size and descriptor dimension must be positive, got h={self.h}, n={self.n}")
        if self.anneal_steps is not None and not 0 <= self.anneal_steps <= self.steps:
            raise InvalidArgumentError(f"anneal_steps must lie in [0, steps], got {self.anneal_steps}")
        if self.schedule.ramp_steps is not None and self.schedule.ramp_steps > self.steps:
            raise InvalidArgumentError(f"theta_m ramp must not exceed steps, got {self.schedule.ramp_steps}")
        if self.eval_interval < 1 or self.eval_samples < 1 or self.batch_size < 1:
            raise InvalidArgumentError("eval_interval, eval_samples and batch_size must be at least 1")

    def resolved(self) -> "TrainConfig":
        """Copy with step-derived defaults made explicit."""
        anneal_steps = self.steps // 6 if self.anneal_steps is None else self.anneal_steps
        ramp_steps = self.steps // 2 if self.schedule.ramp_steps is None else self.schedule.ramp_steps
        return replace(
            self,
            anneal_steps=anneal_steps,
            schedule=replace(self.schedule, ramp_steps=ramp_steps),
        )

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "lr": self.lr,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "h": self.h,
            "n": self.n,
            "rewards": self.rewards.to_dict(),
            "anneal_steps": self.anneal_steps,
            "theta_start": self.schedule.theta_start,
            "theta_end": self.schedule.theta_end,
            "theta_ramp": self.schedule.ramp_steps,
            "seed": self.seed,
            "eval_interval": self.eval_interval,
            "eval_samples": self.eval_samples,
            "batch_size": self.batch_size,
            "shared_field": self.shared_field,
            "eval_mode": self.evaluation.mode,
            "ratio": self.evaluation.ratio_threshold,
            "nms_radius": self.evaluation.nms_radius,
            "budget": self.evaluation.budget,
        }
