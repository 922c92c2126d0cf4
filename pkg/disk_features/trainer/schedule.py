from typing import Tuple

from ..errors import InvalidArgumentError
from .config import TrainConfig


def _ramp(step: int, length: int) -> float:
    if length <= 0:
        return 1.0
    return min(step, length) / length


def anneal(cfg: TrainConfig, step: int) -> Tuple[float, float, float]:
    """
    Effective (lambda_fp, lambda_kp, theta_m) at `step`.

    The penalties grow linearly from 0 to their configured values over
    anneal_steps; theta_m moves linearly from theta_start to theta_end over
    the ramp. Both stay constant afterwards.
    """
    if step < 0:
        raise InvalidArgumentError(f"Step must be >= 0, got {step}")
    cfg = cfg.resolved()
    penalty_scale = _ramp(step, cfg.anneal_steps)
    theta_scale = _ramp(step, cfg.schedule.ramp_steps)

    theta_m = cfg.schedule.theta_start + theta_scale * (cfg.schedule.theta_end - cfg.schedule.theta_start)
    return (
        penalty_scale * cfg.rewards.lambda_fp,
        penalty_scale * cfg.rewards.lambda_kp,
        theta_m,
    )
