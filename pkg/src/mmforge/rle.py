"""Run-length encoded binary masks.

Runs scan column-major (down column 0 top to bottom, then column 1, ...) and
the first run counts background pixels, which may be zero. Containment checks
are O(log runs) over the cumulative run boundaries.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import InvalidMask


class RleMask:
    """Column-major background-first run-length mask."""

    __slots__ = ("height", "width", "runs", "_bounds")

    def __init__(self, height: int, width: int, runs: Sequence[int]):
        if height < 1 or width < 1:
            raise InvalidMask("mask dimensions must be positive")
        arr = np.asarray(runs, dtype=np.int64)
        if arr.ndim != 1 or (arr.size and arr.min() < 0):
            raise InvalidMask("runs must be a flat sequence of non-negative ints")
        if int(arr.sum()) != height * width:
            raise InvalidMask(
                f"runs sum to {int(arr.sum())}, expected {height}x{width}={height * width}"
            )
        self.height = height
        self.width = width
        self.runs = tuple(int(r) for r in arr)
        self._bounds = np.cumsum(arr)

    @classmethod
    def from_dense(cls, mask: np.ndarray) -> "RleMask":
        """Encode a 2-D boolean array (indexed [y, x])."""
        dense = np.asarray(mask, dtype=bool)
        if dense.ndim != 2:
            raise InvalidMask("dense mask must be 2-D")
        flat = dense.ravel(order="F").astype(np.int8)
        changes = np.flatnonzero(np.diff(flat))
        edges = np.concatenate(([0], changes + 1, [flat.size]))
        runs = np.diff(edges).tolist()
        if flat.size and flat[0] == 1:
            runs.insert(0, 0)  # background-first convention
        return cls(dense.shape[0], dense.shape[1], runs)

    def to_dense(self) -> np.ndarray:
        """Decode to a 2-D boolean array indexed [y, x]."""
        values = np.arange(len(self.runs)) % 2 == 1
        flat = np.repeat(values, self.runs)
        return flat.reshape((self.width, self.height)).T

    @property
    def area(self) -> int:
        return sum(self.runs[1::2])

    def contains(self, px: int, py: int) -> bool:
        """Is integer pixel (px, py) foreground? Out-of-bounds pixels are not."""
        if not (0 <= px < self.width and 0 <= py < self.height):
            return False
        flat = px * self.height + py
        run = int(np.searchsorted(self._bounds, flat, side="right"))
        return run % 2 == 1

    def contains_point(self, px: float, py: float) -> bool:
        """Containment for a real-valued pixel position.

        The position is mapped to the pixel cell containing it; the right and
        bottom image edges belong to the last cell, so denormalized points at
        exactly x=1000 or y=1000 still resolve inside the image. Negative
        positions are outside.
        """
        if px < 0 or py < 0:
            return False
        ix = min(int(math.floor(px)), self.width - 1)
        iy = min(int(math.floor(py)), self.height - 1)
        return self.contains(ix, iy)
