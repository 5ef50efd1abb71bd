"""k-nearest-neighbour graph over achieved outcomes and basis-goal selection.

The basis goal is the outcome whose k nearest stored neighbours are, on
average, farthest away: it sits in the sparsest explored region.

:func:`knn` rebuilds the graph from scratch.  :class:`NeighborGraph` keeps the
same graph up to date one insertion at a time; its statistics are identical,
bit for bit, to a fresh :func:`knn` over the same outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    InsufficientDataError,
    approx_sq_distances,
    exact_distances_dedup,
    k_smallest,
    screen_tolerance,
    stack_vectors,
)


@dataclass(frozen=True)
class NeighborStats:
    neighbor_indices: tuple[int, ...]
    neighbor_distances: tuple[float, ...]
    avg_distance: float


def _mean(d: np.ndarray) -> float:
    # Shared by the batch and incremental paths so both round identically.
    return float(np.sum(d) / d.shape[0])


def knn(outcomes: Sequence | np.ndarray, k: int) -> list[NeighborStats]:
    """Nearest ``min(k, n-1)`` other outcomes of every outcome, ties to lowest index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    X = stack_vectors(outcomes)
    n = X.shape[0]
    if n < 2:
        raise InsufficientDataError("knn needs at least 2 outcomes")
    sq = np.einsum("ij,ij->i", X, X)
    gram = X @ X.T
    stats = []
    for i in range(n):
        approx = sq - 2.0 * gram[i] + sq[i]
        idx, d = k_smallest(X, X[i], k, sqnorms=sq, approx=approx, exclude=i)
        stats.append(NeighborStats(tuple(int(j) for j in idx), tuple(float(v) for v in d), _mean(d)))
    return stats


def select_basis(stats: Sequence[NeighborStats] | np.ndarray) -> int:
    """Index of the largest average neighbour distance; lowest index wins ties."""
    if isinstance(stats, np.ndarray):
        avg = stats
    else:
        avg = np.array([s.avg_distance for s in stats], dtype=np.float64)
    if avg.size == 0:
        raise ValueError("select_basis needs at least one entry")
    return int(np.argmax(avg))


class NeighborGraph:
    """Incrementally maintained k-NN graph.

    Adding a point costs one distance row against the stored outcomes (one
    BLAS gemv plus exact re-checks of the few rows whose neighbour lists may
    change) instead of the O(n^2) rebuild.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self._n = 0
        cap = 64
        self._idx = np.full((cap, self.k), -1, dtype=np.intp)
        self._dist = np.full((cap, self.k), np.inf)
        self._count = np.zeros(cap, dtype=np.intp)
        self._avg = np.zeros(cap)

    def __len__(self) -> int:
        return self._n

    def _grow(self) -> None:
        cap = 2 * self._idx.shape[0]
        idx = np.full((cap, self.k), -1, dtype=np.intp)
        dist = np.full((cap, self.k), np.inf)
        count = np.zeros(cap, dtype=np.intp)
        avg = np.zeros(cap)
        idx[: self._n] = self._idx[: self._n]
        dist[: self._n] = self._dist[: self._n]
        count[: self._n] = self._count[: self._n]
        avg[: self._n] = self._avg[: self._n]
        self._idx, self._dist, self._count, self._avg = idx, dist, count, avg

    def add(self, points: np.ndarray, sqnorms: np.ndarray, canon: np.ndarray | None = None) -> None:
        """Register row ``len(self)`` of ``points`` (rows before it are already registered).

        ``canon`` optionally maps each row to the first row with an identical
        point, letting duplicates share one exact distance computation.
        """
        new = self._n
        q = points[new]
        if new == self._idx.shape[0]:
            self._grow()
        self._n += 1
        if new == 0:
            return
        X = points[:new]
        sq = sqnorms[:new]
        approx = approx_sq_distances(X, sq, q)
        tol = screen_tolerance(sq, q)

        if canon is not None:
            canon = canon[:new]
        idx, d = k_smallest(X, q, self.k, sqnorms=sq, approx=approx, canon=canon)
        m = idx.shape[0]
        self._idx[new, :m] = idx
        self._dist[new, :m] = d
        self._count[new] = m
        self._avg[new] = _mean(d)

        # Existing points whose lists are short, or whose k-th neighbour might
        # be farther than the new point.
        count = self._count[:new]
        kth = self._dist[:new, self.k - 1]
        maybe = (count < self.k) | (approx <= kth * kth + 2.0 * tol)
        cand = np.flatnonzero(maybe)
        if cand.size == 0:
            return
        dc = exact_distances_dedup(X, q, cand, canon)
        for i, di in zip(cand.tolist(), dc.tolist()):
            c = int(self._count[i])
            if c == self.k and not di < self._dist[i, c - 1]:
                continue
            row_d = self._dist[i, :c]
            # New index is the largest, so it goes after equal distances.
            pos = int(np.searchsorted(row_d, di, side="right"))
            stop = min(c, self.k - 1)
            self._dist[i, pos + 1: stop + 1] = self._dist[i, pos:stop].copy()
            self._idx[i, pos + 1: stop + 1] = self._idx[i, pos:stop].copy()
            self._dist[i, pos] = di
            self._idx[i, pos] = new
            if c < self.k:
                self._count[i] = c + 1
            cc = int(self._count[i])
            self._avg[i] = _mean(self._dist[i, :cc])

    @property
    def avg_distances(self) -> np.ndarray:
        return self._avg[: self._n].copy()

    def stats(self) -> list[NeighborStats]:
        out = []
        for i in range(self._n):
            c = int(self._count[i])
            out.append(NeighborStats(tuple(int(j) for j in self._idx[i, :c]),
                                     tuple(float(v) for v in self._dist[i, :c]),
                                     float(self._avg[i])))
        return out

    def basis(self) -> int:
        if self._n == 0:
            raise InsufficientDataError("graph is empty")
        if self._n == 1:
            return 0
        return select_basis(self._avg[: self._n])
