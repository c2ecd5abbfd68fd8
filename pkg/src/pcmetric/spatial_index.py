"""Exact nearest-neighbor index over one point cloud.

A bounding-box kd-tree: nodes split at the median of the widest axis and
leaves hold up to ``LEAF_SIZE`` points. Queries return the true minimum
squared Euclidean distance; equidistant candidates resolve to the lowest
point index, so results do not depend on tree shape or traversal order.
The index never mutates after construction and may be queried from any
number of threads.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .backend import get_kernels
from .errors import DataError
from .pc_io import PointCloud

LEAF_SIZE = 32


def _build_arrays(points: np.ndarray):
    """Median-split on the widest axis; returns (perm, left, right, start, end, bb_min, bb_max)."""
    n = points.shape[0]
    perm = np.arange(n, dtype=np.int64)
    left: list[int] = []
    right: list[int] = []
    start: list[int] = []
    end: list[int] = []
    bb_min: list[np.ndarray] = []
    bb_max: list[np.ndarray] = []

    # Depth is ~log2(n / LEAF_SIZE); raise the recursion cap for huge clouds.
    depth_bound = max(64, 2 * int(np.ceil(np.log2(max(n, 2)))) + 16)
    old_limit = sys.getrecursionlimit()
    if old_limit < depth_bound + 64:
        sys.setrecursionlimit(depth_bound + 64)

    def rec(lo: int, hi: int) -> int:
        nid = len(start)
        start.append(lo)
        end.append(hi)
        left.append(-1)
        right.append(-1)
        seg = perm[lo:hi]
        pts = points[seg]
        bb_min.append(pts.min(axis=0))
        bb_max.append(pts.max(axis=0))
        if hi - lo > LEAF_SIZE:
            axis = int(np.argmax(bb_max[nid] - bb_min[nid]))
            mid = (hi - lo) // 2
            order = np.argpartition(pts[:, axis], mid)
            perm[lo:hi] = seg[order]
            left[nid] = rec(lo, lo + mid)
            right[nid] = rec(lo + mid, hi)
        return nid

    try:
        rec(0, n)
    finally:
        sys.setrecursionlimit(old_limit)

    return (
        perm,
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(start, dtype=np.int32),
        np.asarray(end, dtype=np.int32),
        np.ascontiguousarray(np.vstack(bb_min)),
        np.ascontiguousarray(np.vstack(bb_max)),
    )


@dataclass(frozen=True)
class SpatialIndex:
    cloud: PointCloud
    _perm: np.ndarray
    _left: np.ndarray
    _right: np.ndarray
    _start: np.ndarray
    _end: np.ndarray
    _bb_min: np.ndarray
    _bb_max: np.ndarray

    @classmethod
    def build(cls, cloud: PointCloud) -> "SpatialIndex":
        """Build a deterministic index over all points of ``cloud``."""
        arrays = _build_arrays(cloud.points)
        return cls(cloud, *arrays)

    def _tree_args(self):
        return (
            self.cloud.points,
            self._perm,
            self._left,
            self._right,
            self._start,
            self._end,
            self._bb_min,
            self._bb_max,
        )

    def nearest(self, q, backend: str | None = None) -> tuple[int, float]:
        """Exact 1-NN of a single query point: (point_index, squared_distance)."""
        q = np.asarray(q, dtype=np.float64).reshape(1, 3)
        if not np.isfinite(q).all():
            raise DataError("nearest() requires a finite query point")
        idx, dist = get_kernels(backend).nearest_batch(*self._tree_args(), q)
        return int(idx[0]), float(dist[0])

    def nearest_batch(self, queries, backend: str | None = None):
        """Exact 1-NN for an (M, 3) query array: (indices, squared_distances)."""
        queries = np.ascontiguousarray(np.asarray(queries, dtype=np.float64))
        if queries.ndim != 2 or queries.shape[1] != 3:
            raise DataError(f"queries must have shape (M, 3); got {queries.shape}")
        if not np.isfinite(queries).all():
            raise DataError("queries must be finite")
        return get_kernels(backend).nearest_batch(*self._tree_args(), queries)

    def knn(self, queries, k: int, exclude=None, backend: str | None = None):
        """k nearest reference points per query, ascending by (distance, index).

        ``exclude`` optionally gives one reference index per query to skip,
        which is how a cloud queries its own index without matching itself.
        Only as much k-NN as the normal estimator needs: no radius search,
        no dynamic updates.
        """
        queries = np.ascontiguousarray(np.asarray(queries, dtype=np.float64))
        if queries.ndim != 2 or queries.shape[1] != 3:
            raise DataError(f"queries must have shape (M, 3); got {queries.shape}")
        if not np.isfinite(queries).all():
            raise DataError("queries must be finite")
        n_ref = self.cloud.n_points
        if k < 1:
            raise DataError("k must be >= 1")
        limit = n_ref if exclude is None else n_ref - 1
        if k > limit:
            raise DataError(f"k={k} exceeds the {limit} available reference points")
        if exclude is None:
            exclude = np.full(queries.shape[0], -1, dtype=np.int64)
        else:
            exclude = np.asarray(exclude, dtype=np.int64)
            if exclude.shape != (queries.shape[0],):
                raise DataError("exclude must hold one reference index per query")
        return get_kernels(backend).knn_batch(*self._tree_args(), queries, k, exclude)
