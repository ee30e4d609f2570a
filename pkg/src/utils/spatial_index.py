"""
Uniform-cell spatial hash over ball centres.

Centres are bucketed into cubic cells of side `cell_size`; occupied cells are
kept as a sorted key array so that lookups for many query points at once are
a handful of `searchsorted` calls per neighbour offset. Queries return
candidate supersets; callers apply the exact distance test.
"""
import itertools
import math
from typing import Optional, Tuple

import numpy as np

# Keeps the flattened cell key inside int64 (3 * 20 bits)
_MAX_CELLS_PER_AXIS = 2**20


class UniformCellHash:
    def __init__(
        self,
        centers: np.ndarray,
        radii: Optional[np.ndarray] = None,
        cell_size: Optional[float] = None,
    ):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        n = len(self.centers)
        self.radii = (
            np.zeros(n) if radii is None else np.asarray(radii, dtype=float).reshape(n)
        )
        self.max_radius = float(self.radii.max()) if n else 0.0

        span = float(np.ptp(self.centers, axis=0).max()) if n else 0.0
        floor_size = span / _MAX_CELLS_PER_AXIS if span > 0 else 0.0
        requested = cell_size if cell_size is not None else 2.0 * self.max_radius
        self.cell_size = max(requested, floor_size)
        if not self.cell_size > 0:
            self.cell_size = 1.0

        cells = self._cells(self.centers)
        if n:
            self._lo = cells.min(axis=0)
            self._hi = cells.max(axis=0)
        else:
            self._lo = np.zeros(3, dtype=np.int64)
            self._hi = -np.ones(3, dtype=np.int64)
        self._dims = self._hi - self._lo + 1
        keys = self._encode(cells)
        self._order = np.argsort(keys, kind="stable")
        self._keys, self._starts, self._counts = np.unique(
            keys[self._order], return_index=True, return_counts=True
        )

    def __len__(self) -> int:
        return len(self.centers)

    def _cells(self, points: np.ndarray) -> np.ndarray:
        return np.floor(points / self.cell_size).astype(np.int64)

    def _encode(self, cells: np.ndarray) -> np.ndarray:
        rel = cells - self._lo
        return (rel[:, 0] * self._dims[1] + rel[:, 1]) * self._dims[2] + rel[:, 2]

    def candidates(
        self, points: np.ndarray, reach: float = 0.0, include_radii: bool = True
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Return (query_index, item_index) pairs covering every item whose
        ball can come within `reach` of the query point."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        if len(self) == 0 or len(points) == 0:
            return empty

        extra = self.max_radius if include_radii else 0.0
        k = int(math.ceil((reach + extra) / self.cell_size))
        ranges = [range(-min(k, d), min(k, d) + 1) for d in self._dims]
        query_cells = self._cells(points)

        out_q, out_items = [], []
        for offset in itertools.product(*ranges):
            neighbour = query_cells + np.asarray(offset, dtype=np.int64)
            valid = np.all((neighbour >= self._lo) & (neighbour <= self._hi), axis=1)
            if not valid.any():
                continue
            qidx = np.nonzero(valid)[0]
            keys = self._encode(neighbour[valid])
            pos = np.searchsorted(self._keys, keys)
            pos_safe = np.minimum(pos, len(self._keys) - 1)
            hit = (pos < len(self._keys)) & (self._keys[pos_safe] == keys)
            if not hit.any():
                continue
            starts = self._starts[pos[hit]]
            counts = self._counts[pos[hit]]
            within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            out_q.append(np.repeat(qidx[hit], counts))
            out_items.append(self._order[np.repeat(starts, counts) + within])

        if not out_q:
            return empty
        return np.concatenate(out_q), np.concatenate(out_items)

    def query_ball(self, point, radius: float) -> np.ndarray:
        # Superset of the items whose ball intersects B_radius(point)
        _, items = self.candidates(np.asarray(point, dtype=float)[None, :], radius)
        return np.unique(items)

    def pairs_within(self, distance: float) -> np.ndarray:
        """All index pairs (i < j) with |c_i - c_j| <= distance, shape (k, 2)."""
        qi, items = self.candidates(self.centers, distance, include_radii=False)
        keep = qi < items
        qi, items = qi[keep], items[keep]
        d = np.linalg.norm(self.centers[qi] - self.centers[items], axis=1)
        close = d <= distance
        pairs = np.stack([qi[close], items[close]], axis=1)
        if len(pairs) == 0:
            return pairs.reshape(0, 2)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]
