from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import expit, log_expit, log_softmax

from ..errors import InvalidArgumentError
from ..models.features import FeatureSet, Keypoint
from ..models.field import FeatureField, normalize_rows, raw_descriptors
from .grid import GridSpec


@dataclass(frozen=True, eq=False)
class SampledDetections:
    """Features drawn from the training-time distribution, at most one per cell."""

    features: FeatureSet
    proposals_rejected: int
    cell_indices: np.ndarray
    grid: GridSpec

    def __len__(self) -> int:
        return len(self.features)


def cell_log_probabilities(field: FeatureField, grid: GridSpec) -> np.ndarray:
    """log softmax of every cell, shape (num_cells, max_cell_size), -inf on padding."""
    logits = grid.gather(field.heatmap)
    return log_softmax(logits, axis=1)


def sample_features(field: FeatureField, grid: GridSpec, rng: np.random.Generator) -> SampledDetections:
    """
    Draw one proposal per cell from softmax(H) and accept it with sigmoid(H_p).

    Random numbers are consumed in a fixed order (all selection uniforms, then
    all acceptance uniforms), so the result depends only on the generator state.
    """
    if not grid.matches(field.height, field.width):
        raise InvalidArgumentError(
            f"Grid {grid.height}x{grid.width} does not match field {field.height}x{field.width}"
        )

    logits = grid.gather(field.heatmap)
    log_select = log_softmax(logits, axis=1)
    cumulative = np.cumsum(np.exp(log_select), axis=1)
    cell_sizes = np.count_nonzero(~grid.padding_mask, axis=1)

    selection_draws = rng.random(grid.num_cells)
    choice = np.count_nonzero(cumulative < selection_draws[:, None], axis=1)
    choice = np.minimum(choice, cell_sizes - 1)

    cells = np.arange(grid.num_cells)
    chosen_logits = logits[cells, choice]
    acceptance_draws = rng.random(grid.num_cells)
    accepted = acceptance_draws < expit(chosen_logits)

    return _assemble(field, grid, cells[accepted], choice[accepted], log_select, logits)


def sampled_at(field: FeatureField, grid: GridSpec, pixels: Sequence[Tuple[int, int]]) -> SampledDetections:
    """
    The sampled set consisting of exactly `pixels`, with log-probabilities under `field`.

    Lets gradient checks and enumerations fix the outcome of `sample_features`.

    Raises:
        InvalidArgumentError: If a pixel is outside the field or two pixels share a cell
    """
    if not grid.matches(field.height, field.width):
        raise InvalidArgumentError(
            f"Grid {grid.height}x{grid.width} does not match field {field.height}x{field.width}"
        )
    for x, y in pixels:
        if not field.contains(x, y):
            raise InvalidArgumentError(f"Pixel ({x}, {y}) outside {field.width}x{field.height} field")

    cells = np.array([grid.cell_of(x, y) for x, y in pixels], dtype=np.intp)
    if len(np.unique(cells)) != len(cells):
        raise InvalidArgumentError("Sampled pixels must come from distinct cells")

    flat = np.array([y * field.width + x for x, y in pixels], dtype=np.intp)
    choice = np.argmax(grid.pixel_table[cells] == flat[:, None], axis=1) if len(cells) else cells
    order = np.argsort(cells, kind="stable")

    logits = grid.gather(field.heatmap)
    log_select = log_softmax(logits, axis=1)
    return _assemble(field, grid, cells[order], choice[order], log_select, logits)


def _assemble(
    field: FeatureField,
    grid: GridSpec,
    kept_cells: np.ndarray,
    kept_choice: np.ndarray,
    log_select: np.ndarray,
    logits: np.ndarray,
) -> SampledDetections:
    pixels = grid.pixel_table[kept_cells, kept_choice]
    ys, xs = np.divmod(pixels, field.width)

    log_probs = log_select[kept_cells, kept_choice] + log_expit(logits[kept_cells, kept_choice])
    descriptors, _ = normalize_rows(raw_descriptors(field, xs, ys).reshape(len(pixels), field.descriptor_dim))
    keypoints = tuple(
        Keypoint(int(x), int(y), float(field.heatmap[y, x])) for x, y in zip(xs, ys)
    )

    features = FeatureSet(field.width, field.height, keypoints, descriptors, log_probs)
    return SampledDetections(
        features=features,
        proposals_rejected=int(grid.num_cells - len(kept_cells)),
        cell_indices=kept_cells,
        grid=grid,
    )
