"""Exact k-nearest-neighbor backends: brute force and a KD-tree.

Both backends operate on the same pre-scaled coordinates (each dimension
multiplied by sqrt of its feature weight), so a plain Euclidean metric in the
scaled space equals the weighted metric in the original space and the two
backends return bitwise-identical distances. Ties in distance always break by
ascending point id.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np


def _prescale(points: np.ndarray, weights: np.ndarray | None) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if weights is None:
        return points
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("feature weights must be positive")
    return points * np.sqrt(weights)


def brute_knn(
    query: np.ndarray,
    points: np.ndarray,
    k: int,
    weights: np.ndarray | None = None,
    ids: np.ndarray | None = None,
    active: np.ndarray | None = None,
) -> list[tuple[int, float]]:
    """k nearest points by full scan, ascending (distance, id).

    `active` is an optional boolean mask; inactive points are never returned.
    Returns min(k, #active) pairs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    points = _prescale(points, weights)
    query = _prescale(np.asarray(query, dtype=np.float64), weights)
    if ids is None:
        ids = np.arange(points.shape[0])
    if points.shape[0] == 0:
        return []
    d2 = np.sum((points - query) ** 2, axis=1)
    if active is not None:
        d2 = np.where(active, d2, np.inf)
    order = np.lexsort((ids, d2))
    out = []
    for i in order[: min(k, len(order))]:
        if not np.isfinite(d2[i]):
            break
        out.append((int(ids[i]), float(np.sqrt(d2[i]))))
    return out


@dataclass
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    idx: np.ndarray | None = None  # leaf point positions, else internal
    left: "_Node | None" = None
    right: "_Node | None" = None


@dataclass
class KdTree:
    """Balanced KD-tree over a fixed point set; immutable after build.

    Splits on the max-spread dimension at the median, leaves hold up to
    `leaf_size` points. Queries are exact and use the same tie-break as
    `brute_knn`. `visits` counts nodes touched since the last reset
    (instrumentation for complexity checks).
    """

    points: np.ndarray
    ids: np.ndarray | None = None
    leaf_size: int = 32
    weights: np.ndarray | None = None
    visits: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        self._scaled = _prescale(self.points, self.weights)
        if self._scaled.shape[0] == 0:
            raise ValueError("cannot build a KD-tree on an empty point set")
        if self.ids is None:
            self.ids = np.arange(self._scaled.shape[0])
        else:
            self.ids = np.asarray(self.ids)
        self._root = self._build(np.arange(self._scaled.shape[0]))

    def _build(self, pos: np.ndarray) -> _Node:
        pts = self._scaled[pos]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if len(pos) <= self.leaf_size or np.all(hi == lo):
            return _Node(lo=lo, hi=hi, idx=pos)
        dim = int(np.argmax(hi - lo))
        mid = len(pos) // 2
        order = np.argpartition(pts[:, dim], mid)
        return _Node(
            lo=lo,
            hi=hi,
            left=self._build(pos[order[:mid]]),
            right=self._build(pos[order[mid:]]),
        )

    def reset_visits(self) -> None:
        self.visits = 0

    def query(
        self,
        q: np.ndarray,
        k: int,
        active: np.ndarray | None = None,
    ) -> list[tuple[int, float]]:
        """k nearest active points, ascending (distance, id)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = _prescale(np.asarray(q, dtype=np.float64), self.weights)
        heap: list[tuple[float, int, int]] = []  # (-d2, -id, position)

        def box_d2(node: _Node) -> float:
            d = np.maximum(node.lo - q, 0.0) + np.maximum(q - node.hi, 0.0)
            return float(np.dot(d, d))

        def visit(node: _Node) -> None:
            self.visits += 1
            if node.idx is not None:
                pos = node.idx
                if active is not None:
                    pos = pos[active[pos]]
                    if len(pos) == 0:
                        return
                d2 = np.sum((self._scaled[pos] - q) ** 2, axis=1)
                for p, d in zip(pos, d2):
                    entry = (-float(d), -int(self.ids[p]), int(p))
                    if len(heap) < k:
                        heapq.heappush(heap, entry)
                    elif entry > heap[0]:
                        heapq.heapreplace(heap, entry)
                return
            children = [node.left, node.right]
            d2s = [box_d2(c) for c in children]
            for d2c, child in sorted(zip(d2s, children), key=lambda t: t[0]):
                # slack keeps equal-distance candidates reachable despite
                # rounding differences between box and point distances, so
                # the id tie-break stays exact
                if len(heap) == k:
                    worst = -heap[0][0]
                    if d2c > worst + 1e-9 * (1.0 + worst):
                        continue
                visit(child)

        visit(self._root)
        # order by squared distance, not its sqrt: matches brute_knn exactly
        # even when sqrt rounds two distinct d2 values to the same float
        kept = sorted((-nd2, int(self.ids[p])) for nd2, _nid, p in heap)
        return [(i, float(np.sqrt(d2))) for d2, i in kept]

    @property
    def depth(self) -> int:
        def d(node: _Node) -> int:
            if node.idx is not None:
                return 1
            return 1 + max(d(node.left), d(node.right))

        return d(self._root)
