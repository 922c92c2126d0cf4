from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import softmax

from ..errors import InvalidArgumentError
from ..models.features import FeatureSet

if TYPE_CHECKING:
    from .inference import MatchSet


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Pairwise l2 distances d(i, j) between unit descriptors of F_A and F_B."""

    d: np.ndarray

    def __post_init__(self) -> None:
        d = np.array(self.d, dtype=np.float64, copy=True)
        if d.ndim != 2:
            raise InvalidArgumentError(f"Distance matrix must be 2-D, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def rows(self) -> int:
        return int(self.d.shape[0])

    @property
    def cols(self) -> int:
        return int(self.d.shape[1])

    @property
    def shape(self):
        return self.d.shape


def distance_matrix(fa: FeatureSet, fb: FeatureSet) -> DistanceMatrix:
    """
    l2 distance between every descriptor pair.

    Raises:
        InvalidArgumentError: If the descriptor dimensions differ
    """
    if fa.descriptor_dim != fb.descriptor_dim:
        raise InvalidArgumentError(
            f"Descriptor dimensions differ: {fa.descriptor_dim} vs {fb.descriptor_dim}"
        )
    if len(fa) == 0 or len(fb) == 0:
        return DistanceMatrix(np.zeros((len(fa), len(fb))))
    return DistanceMatrix(cdist(fa.descriptors, fb.descriptors, metric="euclidean"))


@dataclass(frozen=True, eq=False)
class MatchDistribution:
    """
    Relaxed cycle-consistent matching.

    Forward rows softmax(-theta_m * d(i, .)), reverse columns
    softmax(-theta_m * d(., j)); a pair matches when both draws agree, so
    P(i <-> j) = forward[i, j] * reverse[i, j].
    """

    dist: DistanceMatrix
    theta_m: float

    def __post_init__(self) -> None:
        if not (self.theta_m > 0.0 and np.isfinite(self.theta_m)):
            raise InvalidArgumentError(f"Inverse temperature must be positive, got {self.theta_m}")

    @cached_property
    def forward(self) -> np.ndarray:
        if self.dist.d.size == 0:
            return np.zeros(self.dist.shape)
        return softmax(-self.theta_m * self.dist.d, axis=1)

    @cached_property
    def reverse(self) -> np.ndarray:
        if self.dist.d.size == 0:
            return np.zeros(self.dist.shape)
        return softmax(-self.theta_m * self.dist.d, axis=0)

    @cached_property
    def probabilities(self) -> np.ndarray:
        return self.forward * self.reverse


def match_prob_pair(md: MatchDistribution, i: int, j: int) -> float:
    """Exact probability that F_A[i] and F_B[j] are matched."""
    if not (0 <= i < md.dist.rows and 0 <= j < md.dist.cols):
        raise InvalidArgumentError(f"Pair ({i}, {j}) outside {md.dist.rows}x{md.dist.cols} matrix")
    return float(md.probabilities[i, j])


def expected_reward(md: MatchDistribution, rewards: np.ndarray) -> float:
    """
    Closed-form E[R] = sum_ij P(i <-> j) * r(i, j).

    Unmatched features earn nothing, so only pairs contribute.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.shape != md.dist.shape:
        raise InvalidArgumentError(f"Reward matrix {rewards.shape} does not match distances {md.dist.shape}")
    return float(np.sum(md.probabilities * rewards))


def sample_matches(md: MatchDistribution, rng: np.random.Generator) -> "MatchSet":
    """
    Draw forward and reverse matches and keep the consistent ones.

    Monte Carlo reference for `expected_reward`; the gradient estimator never
    samples matches.
    """
    from .inference import MatchSet

    rows, cols = md.dist.shape
    if rows == 0 or cols == 0:
        return MatchSet(pairs=())

    forward_draws = rng.random(rows)
    forward = np.count_nonzero(np.cumsum(md.forward, axis=1) < forward_draws[:, None], axis=1)
    forward = np.minimum(forward, cols - 1)

    reverse_draws = rng.random(cols)
    reverse = np.count_nonzero(np.cumsum(md.reverse, axis=0) < reverse_draws[None, :], axis=0)
    reverse = np.minimum(reverse, rows - 1)

    matched = np.flatnonzero(reverse[forward] == np.arange(rows))
    pairs = tuple(zip(matched.tolist(), forward[matched].tolist()))
    probabilities = md.probabilities[matched, forward[matched]]
    return MatchSet(pairs=pairs, probabilities=probabilities)
