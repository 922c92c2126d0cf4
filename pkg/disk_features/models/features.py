from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgumentError

UNIT_NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, slots=True)
class Keypoint:
    """Pixel location (0-based column x, row y) with its heatmap score."""

    x: int
    y: int
    score: float

    def row_major_index(self, width: int) -> int:
        return self.y * width + self.x

    def __str__(self) -> str:
        return f"({self.x}, {self.y}) s={self.score:.3f}"


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """
    Keypoints of one view with aligned unit descriptors.

    Sampled sets additionally carry log P(feature) per keypoint; sets produced
    by the deterministic detectors leave `log_probs` as None.
    """

    width: int
    height: int
    keypoints: Tuple[Keypoint, ...]
    descriptors: np.ndarray
    log_probs: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        keypoints = tuple(self.keypoints)
        object.__setattr__(self, "keypoints", keypoints)

        descriptors = np.asarray(self.descriptors, dtype=np.float64)
        if descriptors.ndim != 2 or descriptors.shape[0] != len(keypoints):
            raise InvalidArgumentError(
                f"Expected {len(keypoints)} descriptor rows, got array of shape {descriptors.shape}"
            )
        if len(keypoints):
            norms = np.linalg.norm(descriptors, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
                raise InvalidArgumentError("Feature descriptors must have unit l2 norm")
        object.__setattr__(self, "descriptors", descriptors)

        locations = {(kp.x, kp.y) for kp in keypoints}
        if len(locations) != len(keypoints):
            raise InvalidArgumentError("Keypoints must occupy distinct pixels")
        for kp in keypoints:
            if not (0 <= kp.x < self.width and 0 <= kp.y < self.height):
                raise InvalidArgumentError(f"Keypoint {kp} outside {self.width}x{self.height} image")

        if self.log_probs is not None:
            log_probs = np.asarray(self.log_probs, dtype=np.float64)
            if log_probs.shape != (len(keypoints),):
                raise InvalidArgumentError("log_probs must align with keypoints")
            if np.any(log_probs > 0.0):
                raise InvalidArgumentError("log_probs must be <= 0")
            object.__setattr__(self, "log_probs", log_probs)

    @classmethod
    def empty(cls, width: int, height: int, descriptor_dim: int) -> "FeatureSet":
        return cls(width, height, (), np.zeros((0, descriptor_dim)))

    @property
    def descriptor_dim(self) -> int:
        return int(self.descriptors.shape[1])

    @property
    def is_sampled(self) -> bool:
        return self.log_probs is not None

    @property
    def xs(self) -> np.ndarray:
        return np.array([kp.x for kp in self.keypoints], dtype=np.intp)

    @property
    def ys(self) -> np.ndarray:
        return np.array([kp.y for kp in self.keypoints], dtype=np.intp)

    @property
    def scores(self) -> np.ndarray:
        return np.array([kp.score for kp in self.keypoints], dtype=np.float64)

    @property
    def points(self) -> np.ndarray:
        """Pixel coordinates as an (n, 2) float array of (x, y)."""
        return np.column_stack([self.xs, self.ys]).astype(np.float64).reshape(-1, 2)

    def row_major_indices(self) -> np.ndarray:
        return self.ys * self.width + self.xs

    def subset(self, indices: Iterable[int]) -> "FeatureSet":
        chosen = [int(i) for i in indices]
        log_probs = None if self.log_probs is None else self.log_probs[chosen]
        return FeatureSet(
            self.width,
            self.height,
            tuple(self.keypoints[i] for i in chosen),
            self.descriptors[chosen].reshape(len(chosen), self.descriptor_dim),
            log_probs,
        )

    def __len__(self) -> int:
        return len(self.keypoints)

    def __repr__(self) -> str:
        kind = "sampled" if self.is_sampled else "detected"
        return f"FeatureSet({len(self)} {kind} keypoints, N={self.descriptor_dim})"


def feature_set_from_pixels(
    width: int,
    height: int,
    pixels: Sequence[Tuple[int, int]],
    scores: Sequence[float],
    descriptors: np.ndarray,
    log_probs: Optional[np.ndarray] = None,
) -> FeatureSet:
    keypoints = tuple(Keypoint(int(x), int(y), float(s)) for (x, y), s in zip(pixels, scores))
    return FeatureSet(width, height, keypoints, descriptors, log_probs)
