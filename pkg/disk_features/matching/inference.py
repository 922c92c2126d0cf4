from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import InvalidArgumentError
from .distribution import DistanceMatrix

DEFAULT_RATIO_THRESHOLD = 0.95


@dataclass(frozen=True, eq=False)
class MatchSet:
    """Index pairs (i into F_A, j into F_B), optionally with P(i <-> j)."""

    pairs: Tuple[Tuple[int, int], ...]
    probabilities: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        if self.probabilities is not None:
            probabilities = np.asarray(self.probabilities, dtype=np.float64)
            if probabilities.shape != (len(self.pairs),):
                raise InvalidArgumentError("Match probabilities must align with pairs")
            object.__setattr__(self, "probabilities", probabilities)

    def is_one_to_one(self) -> bool:
        rows = [i for i, _ in self.pairs]
        cols = [j for _, j in self.pairs]
        return len(set(rows)) == len(rows) and len(set(cols)) == len(cols)

    def as_set(self) -> set:
        return set(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def _ratio_pass(nearest: np.ndarray, second: np.ndarray, threshold: float) -> np.ndarray:
    # second == 0 means the best candidate is not unique
    if threshold <= 0.0:
        return np.zeros(nearest.shape, dtype=bool)
    return (second > 0.0) & (nearest <= threshold * second)


def _two_smallest(d: np.ndarray, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    ordered = np.partition(d, 1, axis=axis)
    if axis == 1:
        return ordered[:, 0], ordered[:, 1]
    return ordered[0, :], ordered[1, :]


def mutual_nearest_neighbors(dist: DistanceMatrix) -> MatchSet:
    """Cycle-consistent pairs; argmin ties go to the smaller index."""
    if dist.rows == 0 or dist.cols == 0:
        return MatchSet(pairs=())
    forward = np.argmin(dist.d, axis=1)
    reverse = np.argmin(dist.d, axis=0)
    rows = np.flatnonzero(reverse[forward] == np.arange(dist.rows))
    return MatchSet(pairs=tuple(zip(rows.tolist(), forward[rows].tolist())))


def match_inference(dist: DistanceMatrix, ratio_threshold: float = DEFAULT_RATIO_THRESHOLD) -> MatchSet:
    """
    Deterministic matcher: mutual nearest neighbours plus a symmetric ratio test.

    The ratio d(i, j) / d(i, j2) must not exceed `ratio_threshold` on the row
    and, analogously, on the column; rows or columns with a single candidate
    skip their ratio test. A threshold of 0 rejects every pair that has a
    second candidate.

    Raises:
        InvalidArgumentError: If ratio_threshold is outside [0, 1]
    """
    if not 0.0 <= ratio_threshold <= 1.0:
        raise InvalidArgumentError(f"Ratio threshold must lie in [0, 1], got {ratio_threshold}")

    mutual = mutual_nearest_neighbors(dist)
    if not len(mutual):
        return mutual

    d = dist.d
    row_pass = np.ones(dist.rows, dtype=bool)
    col_pass = np.ones(dist.cols, dtype=bool)
    if dist.cols >= 2:
        row_pass = _ratio_pass(*_two_smallest(d, axis=1), ratio_threshold)
    if dist.rows >= 2:
        col_pass = _ratio_pass(*_two_smallest(d, axis=0), ratio_threshold)

    kept = tuple((i, j) for i, j in mutual.pairs if row_pass[i] and col_pass[j])
    return MatchSet(pairs=kept)
