from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit, softmax

from ..errors import InvalidArgumentError

DEFAULT_CELL_SIZE = 8


@dataclass(frozen=True, slots=True)
class CellRegion:
    """Half-open pixel rectangle [y0, y1) x [x0, x1)."""

    y0: int
    y1: int
    x0: int
    x1: int

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def size(self) -> int:
        return self.height * self.width

    def crop(self, grid: np.ndarray) -> np.ndarray:
        return grid[self.y0:self.y1, self.x0:self.x1]

    def local_to_global(self, local_index: int) -> Tuple[int, int]:
        """Row-major index inside the cell -> global (x, y)."""
        dy, dx = divmod(int(local_index), self.width)
        return self.x0 + dx, self.y0 + dy

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True)
class GridSpec:
    """
    Tiling of a height x width image into h x h cells.

    Cells are ordered row-major. Boundary cells are ragged (smaller) when the
    image size is not a multiple of h. `pixel_table` lists, for every cell, its
    global row-major pixel indices in row-major order, padded with -1 up to
    the largest cell size; it drives the vectorized per-cell operations.
    """

    height: int
    width: int
    cell_size: int
    cells: Tuple[CellRegion, ...]
    pixel_table: np.ndarray = field(compare=False, repr=False)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def padding_mask(self) -> np.ndarray:
        return self.pixel_table < 0

    def cell_of(self, x: int, y: int) -> int:
        cells_per_row = -(-self.width // self.cell_size)
        return (y // self.cell_size) * cells_per_row + (x // self.cell_size)

    def gather(self, grid: np.ndarray, fill: float = -np.inf) -> np.ndarray:
        """Per-cell values of a (height, width) grid, shape (num_cells, max_cell_size)."""
        flat = np.asarray(grid, dtype=np.float64).ravel()
        values = flat[np.where(self.padding_mask, 0, self.pixel_table)]
        values[self.padding_mask] = fill
        return values

    def matches(self, height: int, width: int) -> bool:
        return self.height == height and self.width == width


def partition_grid(height: int, width: int, h: int = DEFAULT_CELL_SIZE) -> GridSpec:
    """
    Split the image into ceil(height/h) * ceil(width/h) cells.

    Raises:
        InvalidArgumentError: If h < 1 or the image is empty
    """
    if h < 1:
        raise InvalidArgumentError(f"Cell size must be at least 1, got {h}")
    if height < 1 or width < 1:
        raise InvalidArgumentError(f"Image dimensions must be positive, got {height}x{width}")

    cells = tuple(
        CellRegion(y0, min(y0 + h, height), x0, min(x0 + h, width))
        for y0 in range(0, height, h)
        for x0 in range(0, width, h)
    )

    max_size = max(cell.size for cell in cells)
    table = np.full((len(cells), max_size), -1, dtype=np.intp)
    for index, cell in enumerate(cells):
        ys, xs = np.mgrid[cell.y0:cell.y1, cell.x0:cell.x1]
        table[index, :cell.size] = (ys * width + xs).ravel()

    table.setflags(write=False)
    return GridSpec(height=height, width=width, cell_size=h, cells=cells, pixel_table=table)


def cell_probabilities(cell_logits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Selection and acceptance probabilities of one cell.

    select = softmax over every pixel of the cell, accept = sigmoid per pixel.
    The probability of a feature at p is select_p * accept_p; the cell emits
    nothing with probability sum_p select_p * (1 - accept_p).

    Returns:
        (select, accept), both with the shape of `cell_logits`
    """
    logits = np.asarray(cell_logits, dtype=np.float64)
    if logits.size == 0:
        raise InvalidArgumentError("Cell must contain at least one pixel")
    if not np.all(np.isfinite(logits)):
        raise InvalidArgumentError("Cell logits must be finite")

    select = softmax(logits.ravel()).reshape(logits.shape)
    accept = expit(logits)
    return select, accept
