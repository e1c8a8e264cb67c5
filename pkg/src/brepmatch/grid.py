"""Tolerance-delta candidate retrieval with D+1 diagonally shifted grids.

Grid ``g`` (``g = 0..D``) has cell edge ``(D+1)*delta`` and origin
``g*delta`` along every axis. Two points within ``delta`` of each other
(per-axis, hence also in Euclidean norm) always share a cell in at least one
grid: along each axis the cell boundaries of all grids together form a
lattice of spacing ``delta``, so an axis can separate the pair in at most one
grid, and D axes cannot separate it in all D+1.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable

import numpy as np

from .errors import DuplicateId, InvalidTolerance


class ShiftedGridIndex:
    def __init__(self, delta: float, dim: int = 3):
        if not delta > 0 or not math.isfinite(delta):
            raise InvalidTolerance(f"delta must be a positive finite real, got {delta}")
        self.delta = float(delta)
        self.dim = dim
        self.cell = (dim + 1) * self.delta
        self.grids: list[dict[tuple, list[int]]] = [defaultdict(list) for _ in range(dim + 1)]
        self.ids: list[int] = []
        self.points = np.zeros((0, dim))
        self._row: dict[int, int] = {}
        self._pts: list[list[float]] = []

    @classmethod
    def build(cls, points: Iterable[tuple[int, Iterable[float]]], delta: float, dim: int = 3) -> "ShiftedGridIndex":
        index = cls(delta, dim)
        items = list(points)
        ids = [int(i) for i, _ in items]
        if len(set(ids)) != len(ids):
            raise DuplicateId("point ids must be unique")
        pts = np.array([p for _, p in items], dtype=np.float64).reshape(-1, dim)
        index.ids = ids
        index.points = pts
        index._row = {pid: r for r, pid in enumerate(ids)}
        index._pts = pts.tolist()
        for g, grid in enumerate(index.grids):
            for pid, key in zip(ids, index._keys(pts, g)):
                grid[key].append(pid)
        return index

    def _keys(self, pts: np.ndarray, g: int) -> list[tuple]:
        cells = np.floor((pts - g * self.delta) / self.cell).astype(np.int64)
        return [tuple(row) for row in cells.tolist()]

    def cells_of(self, p) -> list[tuple]:
        """The D+1 cell keys of point ``p`` (one per grid)."""
        xs = [float(x) for x in p]
        d, c = self.delta, self.cell
        return [tuple(math.floor((x - g * d) / c) for x in xs) for g in range(self.dim + 1)]

    def candidates(self, p) -> list[int]:
        """Ids co-celled with ``p`` in any grid, before distance filtering."""
        found: set[int] = set()
        for grid, key in zip(self.grids, self.cells_of(p)):
            found.update(grid.get(key, ()))
        return sorted(found)

    def query(self, p) -> list[int]:
        """Ids of stored points within Euclidean distance ``delta`` of ``p``, ascending."""
        cand = self.candidates(p)
        if not cand:
            return []
        xs = [float(x) for x in p]
        out = []
        for c in cand:
            q = self._pts[self._row[c]]
            if math.sqrt(sum((a - b) ** 2 for a, b in zip(xs, q))) <= self.delta:
                out.append(c)
        return out

    def candidate_pairs(self, probes) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``candidates`` for many probes: parallel arrays (probe row, stored id), sorted, unique."""
        probes = np.asarray(probes, dtype=np.float64).reshape(-1, self.dim)
        n_store = len(self.ids)
        if n_store == 0 or len(probes) == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        codes = []
        for g in range(self.dim + 1):
            ks = np.floor((self.points - g * self.delta) / self.cell).astype(np.int64)
            kp = np.floor((probes - g * self.delta) / self.cell).astype(np.int64)
            cs, cp = self._cell_codes(np.concatenate([ks, kp]), n_store)
            order = np.argsort(cs, kind="stable")
            lo = np.searchsorted(cs[order], cp, side="left")
            hi = np.searchsorted(cs[order], cp, side="right")
            counts = hi - lo
            rows = np.repeat(np.arange(len(probes)), counts)
            starts = np.repeat(lo - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
            stored = order[starts + np.arange(counts.sum())]
            codes.append(rows * n_store + stored)
        code = np.unique(np.concatenate(codes))
        rows, stored = code // n_store, code % n_store
        ids = np.asarray(self.ids, dtype=np.int64)[stored]
        # order by (probe, id) like the scalar query
        key = np.lexsort((ids, rows))
        return rows[key], ids[key]

    @staticmethod
    def _cell_codes(keys: np.ndarray, n_store: int) -> tuple[np.ndarray, np.ndarray]:
        """One integer per cell key row (stored rows first), equal codes iff equal keys."""
        k = keys - keys.min(axis=0)
        span = k.max(axis=0) + 1
        if float(np.prod(span.astype(np.float64))) < 2.0**62:
            code = np.zeros(len(k), dtype=np.int64)
            for d in range(k.shape[1]):
                code = code * span[d] + k[:, d]
        else:
            code = np.unique(keys, axis=0, return_inverse=True)[1].reshape(-1)
        return code[:n_store], code[n_store:]

    def query_pairs(self, probes) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised ``query``: (probe row, stored id) for every stored point within ``delta`` of a probe."""
        probes = np.asarray(probes, dtype=np.float64).reshape(-1, self.dim)
        rows, ids = self.candidate_pairs(probes)
        if len(rows) == 0:
            return rows, ids
        order = np.argsort(np.asarray(self.ids, dtype=np.int64), kind="stable")
        at = order[np.searchsorted(np.asarray(self.ids, dtype=np.int64)[order], ids)]
        d = np.sqrt(((self.points[at] - probes[rows]) ** 2).sum(axis=1))
        keep = d <= self.delta
        return rows[keep], ids[keep]

    def __len__(self) -> int:
        return len(self.ids)
