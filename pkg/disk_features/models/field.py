from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import DegenerateDescriptorError, InvalidArgumentError

DEFAULT_DESCRIPTOR_DIM = 128
HEATMAP_INIT_SCALE = 0.1
DESCRIPTOR_INIT_SCALE = 1.0
MIN_DESCRIPTOR_NORM = 1e-12


def _frozen_float32(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=np.float32, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FeatureField:
    """
    Learnable per-pixel parameters of one view.

    Holds the detection logits K (height x width) and the raw descriptor map
    D (height x width x N). Arrays are stored as read-only float32, which is
    also the on-disk precision, so a save/load round trip is bit-exact.
    All arithmetic on the field is done in float64 by the callers.
    """

    heatmap: np.ndarray
    descriptors: np.ndarray

    def __post_init__(self) -> None:
        heatmap = np.asarray(self.heatmap)
        descriptors = np.asarray(self.descriptors)

        if heatmap.ndim != 2 or min(heatmap.shape) < 1:
            raise InvalidArgumentError(f"Heatmap must be a non-empty 2-D grid, got shape {heatmap.shape}")
        if descriptors.ndim != 3 or descriptors.shape[:2] != heatmap.shape or descriptors.shape[2] < 1:
            raise InvalidArgumentError(
                f"Descriptor map shape {descriptors.shape} does not match heatmap {heatmap.shape}"
            )
        if not (np.all(np.isfinite(heatmap)) and np.all(np.isfinite(descriptors))):
            raise InvalidArgumentError("Feature field contains non-finite entries")

        object.__setattr__(self, "heatmap", _frozen_float32(heatmap))
        object.__setattr__(self, "descriptors", _frozen_float32(descriptors))

    @property
    def height(self) -> int:
        return int(self.heatmap.shape[0])

    @property
    def width(self) -> int:
        return int(self.heatmap.shape[1])

    @property
    def descriptor_dim(self) -> int:
        return int(self.descriptors.shape[2])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def with_parameters(self, heatmap: np.ndarray, descriptors: np.ndarray) -> "FeatureField":
        """New field of the same geometry holding updated parameters."""
        if heatmap.shape != self.heatmap.shape or descriptors.shape != self.descriptors.shape:
            raise InvalidArgumentError("Updated parameters must keep the field geometry")
        return FeatureField(heatmap=heatmap, descriptors=descriptors)

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureField):
            return NotImplemented
        return (
            np.array_equal(self.heatmap, other.heatmap)
            and np.array_equal(self.descriptors, other.descriptors)
        )

    def __repr__(self) -> str:
        return f"FeatureField({self.height}x{self.width}, N={self.descriptor_dim})"


def init_field(height: int, width: int, n: int = DEFAULT_DESCRIPTOR_DIM, seed: int = 0) -> FeatureField:
    """
    Random initial field.

    Heatmap logits ~ N(0, 0.1^2) keep sampling close to uniform with
    acceptance near 0.5; descriptors ~ N(0, 1).

    Raises:
        InvalidArgumentError: If any dimension is smaller than 1
    """
    if height < 1 or width < 1 or n < 1:
        raise InvalidArgumentError(f"Field dimensions must be positive, got {height}x{width}x{n}")

    rng = np.random.default_rng(seed)
    heatmap = rng.normal(0.0, HEATMAP_INIT_SCALE, size=(height, width))
    descriptors = rng.normal(0.0, DESCRIPTOR_INIT_SCALE, size=(height, width, n))
    return FeatureField(heatmap=heatmap, descriptors=descriptors)


def raw_descriptors(field: FeatureField, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Raw (unnormalized) descriptors at the given pixels, as float64 rows."""
    xs = np.asarray(xs, dtype=np.intp)
    ys = np.asarray(ys, dtype=np.intp)
    return field.descriptors[ys, xs].astype(np.float64)


def normalize_rows(raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    l2-normalize descriptor rows.

    Returns:
        (unit rows, row norms)

    Raises:
        DegenerateDescriptorError: If any row has norm below 1e-12
    """
    raw = np.asarray(raw, dtype=np.float64)
    norms = np.linalg.norm(raw, axis=-1)
    if raw.size and np.any(norms < MIN_DESCRIPTOR_NORM):
        raise DegenerateDescriptorError("Descriptor norm below 1e-12 cannot be normalized")
    if raw.ndim == 1:
        return raw / norms, norms
    return raw / norms[..., None], norms


def normalized_descriptor(field: FeatureField, x: int, y: int) -> np.ndarray:
    """
    Unit-length descriptor D(y, x) / ||D(y, x)||.

    Raises:
        InvalidArgumentError: If (x, y) is outside the field
        DegenerateDescriptorError: If the raw descriptor is (numerically) zero
    """
    if not field.contains(x, y):
        raise InvalidArgumentError(f"Pixel ({x}, {y}) outside {field.width}x{field.height} field")
    unit, _ = normalize_rows(field.descriptors[y, x].astype(np.float64))
    return unit
