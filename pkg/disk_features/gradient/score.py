from typing import Tuple, Union

import numpy as np
from scipy.special import expit, softmax

from ..detection.sampler import SampledDetections
from ..errors import InvalidArgumentError


def heatmap_score_grad(cell_logits: np.ndarray, sampled_pixel: Union[int, Tuple[int, int]]) -> np.ndarray:
    """
    Gradient of log P(feature at p) = log softmax(H)_p + log sigmoid(H_p) over one cell.

    At p the gradient is (1 - softmax_p) + (1 - sigmoid(H_p)); every other
    pixel q of the cell gets -softmax_q.

    Args:
        cell_logits: Logits of the cell (any shape)
        sampled_pixel: Row-major index inside the cell, or local (x, y) for a 2-D cell
    """
    logits = np.asarray(cell_logits, dtype=np.float64)
    if isinstance(sampled_pixel, tuple):
        if logits.ndim != 2:
            raise InvalidArgumentError("Local (x, y) pixels need a 2-D cell")
        x, y = sampled_pixel
        if not (0 <= x < logits.shape[1] and 0 <= y < logits.shape[0]):
            raise InvalidArgumentError(f"Pixel ({x}, {y}) outside the {logits.shape} cell")
        index = y * logits.shape[1] + x
    else:
        index = int(sampled_pixel)
        if not 0 <= index < logits.size:
            raise InvalidArgumentError(f"Pixel index {index} outside a cell of {logits.size} pixels")

    flat = logits.ravel()
    grad = -softmax(flat)
    grad[index] += 1.0 + (1.0 - expit(flat[index]))
    return grad.reshape(logits.shape)


def accumulate_score_grad(
    d_heatmap: np.ndarray,
    heatmap: np.ndarray,
    sampled: SampledDetections,
    coefficients: np.ndarray,
) -> None:
    """
    Add sum_i coefficients[i] * grad log P(feature i) into `d_heatmap` in place.

    Vectorized over all sampled features; padding entries of the cell table
    receive nothing.
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (len(sampled),):
        raise InvalidArgumentError("One coefficient per sampled feature is required")
    if not len(sampled):
        return

    grid = sampled.grid
    cells = sampled.cell_indices
    logits = grid.gather(heatmap)[cells]
    select = softmax(logits, axis=1)
    table = grid.pixel_table[cells]
    real = table >= 0

    flat = d_heatmap.reshape(-1)
    np.add.at(flat, table[real], (-coefficients[:, None] * select)[real])

    pixels = sampled.features.row_major_indices()
    chosen = np.asarray(heatmap, dtype=np.float64).ravel()[pixels]
    np.add.at(flat, pixels, coefficients * (2.0 - expit(chosen)))
