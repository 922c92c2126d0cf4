from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class AdamState:
    """First and second moment estimates and the number of updates applied."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        return cls(np.zeros(np.shape(params)), np.zeros(np.shape(params)), 0)


def adam_update(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    step: Optional[int] = None,
) -> Tuple[np.ndarray, AdamState]:
    """
    One bias-corrected ADAM step in the ascent direction.

    params + lr * m_hat / (sqrt(v_hat) + eps), with `step` (default state.t + 1)
    as the bias-correction exponent.

    Raises:
        InvalidArgumentError: On shape mismatch or step < 1
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise InvalidArgumentError(
            f"ADAM shapes differ: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    step = state.t + 1 if step is None else step
    if step < 1:
        raise InvalidArgumentError(f"ADAM step must be >= 1, got {step}")

    beta1, beta2 = betas
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)

    updated = params + lr * m_hat / (np.sqrt(v_hat) + eps)
    return updated, AdamState(m, v, step)
