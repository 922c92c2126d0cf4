from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry.rewards import DEFAULT_EPSILON, SUPERVISION_MODES

DEFAULT_LAMBDA_TP = 1.0
DEFAULT_LAMBDA_FP = -0.25
DEFAULT_LAMBDA_KP = -0.001


@dataclass(frozen=True, slots=True)
class RewardConfig:
    """Match rewards, keypoint penalty and the correctness threshold (pixels)."""

    lambda_tp: float = DEFAULT_LAMBDA_TP
    lambda_fp: float = DEFAULT_LAMBDA_FP
    lambda_kp: float = DEFAULT_LAMBDA_KP
    epsilon: float = DEFAULT_EPSILON
    supervision: str = "depth"

    def __post_init__(self) -> None:
        if not self.lambda_tp > 0.0:
            raise InvalidArgumentError(f"lambda_tp must be positive, got {self.lambda_tp}")
        if not self.lambda_fp <= 0.0:
            raise InvalidArgumentError(f"lambda_fp must be <= 0, got {self.lambda_fp}")
        if not self.lambda_kp <= 0.0:
            raise InvalidArgumentError(f"lambda_kp must be <= 0, got {self.lambda_kp}")
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise InvalidArgumentError(f"epsilon must be a finite non-negative pixel distance, got {self.epsilon}")
        if self.supervision not in SUPERVISION_MODES:
            raise InvalidArgumentError(
                f"Unknown supervision '{self.supervision}', expected one of {SUPERVISION_MODES}"
            )

    def annealed(self, lambda_fp: float, lambda_kp: float) -> "RewardConfig":
        """Copy with effective penalty values substituted."""
        return replace(self, lambda_fp=lambda_fp, lambda_kp=lambda_kp)

    def to_dict(self) -> dict:
        return {
            "lambda_tp": self.lambda_tp,
            "lambda_fp": self.lambda_fp,
            "lambda_kp": self.lambda_kp,
            "epsilon": self.epsilon,
            "supervision": self.supervision,
        }
