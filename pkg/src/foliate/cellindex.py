"""Uniform cell index for neighbor queries, exact across torus seams.

Cells partition the domain into an axis-aligned grid.  Ball queries gather
candidates from every cell the ball can touch (wrapping modularly on a
torus) and then filter by the true metric, so results are exact; the grid
only prunes.
"""

from __future__ import annotations

import itertools

import numpy as np

from .patterns import TORUS, PointPattern, distances_to


class CellIndex:
    def __init__(self, pattern: PointPattern, cell: float | None = None):
        self.pattern = pattern
        self.domain = pattern.domain
        ext = np.asarray(self.domain.extents)
        n = max(len(pattern), 1)
        if cell is None:
            # aim for about one point per cell
            cell = float((self.domain.volume / n) ** (1.0 / self.domain.dimension))
        cell = max(cell, 1e-9)
        bins = np.maximum(1, np.floor(ext / cell).astype(np.int64))
        self.bins = bins
        self.widths = ext / bins
        if len(pattern):
            cells = np.minimum(
                (pattern.coords / self.widths).astype(np.int64), bins - 1
            )
            cells = np.maximum(cells, 0)
            flat = np.ravel_multi_index(tuple(cells.T), tuple(bins))
        else:
            flat = np.empty(0, dtype=np.int64)
        order = np.argsort(flat, kind="stable")
        self._ids = order
        self._flat_sorted = flat[order]
        if self.domain.kind == TORUS:
            self._max_dist = float(np.sqrt(((ext / 2.0) ** 2).sum()))
        else:
            self._max_dist = float(np.sqrt((ext**2).sum()))

    def _cell_points(self, flat: int) -> np.ndarray:
        lo = np.searchsorted(self._flat_sorted, flat, side="left")
        hi = np.searchsorted(self._flat_sorted, flat, side="right")
        return self._ids[lo:hi]

    def _axis_cells(self, lo: int, hi: int, axis: int) -> list[int]:
        nb = int(self.bins[axis])
        span = hi - lo + 1
        if self.domain.kind == TORUS:
            if span >= nb:
                return list(range(nb))
            return [(lo + k) % nb for k in range(span)]
        return list(range(max(lo, 0), min(hi, nb - 1) + 1))

    def query_ball(
        self, x: np.ndarray, r: float, exclude: int | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Ids and distances of all points within closed distance ``r`` of x."""
        x = np.asarray(x, dtype=float)
        los = np.floor((x - r) / self.widths).astype(np.int64)
        his = np.floor((x + r) / self.widths).astype(np.int64)
        ranges = [
            self._axis_cells(int(lo), int(hi), j)
            for j, (lo, hi) in enumerate(zip(los, his))
        ]
        chunks = []
        for cell in itertools.product(*ranges):
            ids = self._cell_points(int(np.ravel_multi_index(cell, tuple(self.bins))))
            if ids.size:
                chunks.append(ids)
        if not chunks:
            return np.empty(0, dtype=np.int64), np.empty(0)
        ids = np.concatenate(chunks)
        if exclude is not None:
            ids = ids[ids != exclude]
        d = distances_to(self.pattern.coords[ids], x, self.domain)
        keep = d <= r
        return ids[keep], d[keep]

    def count_ball(self, x: np.ndarray, r: float) -> int:
        ids, _ = self.query_ball(x, r)
        return int(ids.size)

    def nearest(self, i: int) -> tuple[np.ndarray, float]:
        """All nearest neighbors of point ``i`` and the minimal distance.

        Returns more than one id only on an exact distance tie.
        """
        if len(self.pattern) < 2:
            return np.empty(0, dtype=np.int64), np.inf
        x = self.pattern.coords[i]
        r = float(self.widths.min())
        while True:
            r = min(r, self._max_dist)
            ids, d = self.query_ball(x, r, exclude=i)
            if ids.size:
                dmin = float(d.min())
                ids2, d2 = self.query_ball(x, dmin, exclude=i)
                best = d2 == d2.min()
                return ids2[best], float(d2.min())
            if r >= self._max_dist:
                return np.empty(0, dtype=np.int64), np.inf
            r *= 2.0
