"""Per-point normal estimation via local PCA.

For each point, the k nearest neighbors (excluding the point itself) are
gathered, their 3x3 scatter matrix about the neighborhood centroid is
decomposed, and the unit eigenvector of the smallest eigenvalue becomes
the normal. Sign is arbitrary and therefore canonicalized (largest
component positive) purely for determinism: every consumer squares the
projection, so orientation never matters. No orientation propagation is
attempted.
"""

from __future__ import annotations

import numpy as np

from .backend import get_kernels
from .errors import DataError, NumericError
from .pc_io import PointCloud
from .spatial_index import SpatialIndex

DEFAULT_K = 12


def estimate_normals(
    cloud: PointCloud,
    k: int = DEFAULT_K,
    index: SpatialIndex | None = None,
    backend: str | None = None,
) -> PointCloud:
    """Return a cloud carrying unit normals.

    A cloud that already has normals is returned unchanged. Otherwise the
    neighborhood size ``k`` must be at least 3 and the cloud must hold at
    least ``k + 1`` points. A neighborhood whose scatter matrix is
    numerically zero (all neighbors coincident) raises ``NumericError``
    naming the offending point index.
    """
    if cloud.normals is not None:
        return cloud
    if k < 3:
        raise DataError(f"neighborhood size k must be >= 3; got {k}")
    if cloud.n_points < k + 1:
        raise DataError(
            f"cloud has {cloud.n_points} points; normal estimation with k={k} "
            f"needs at least {k + 1}"
        )
    if index is None:
        index = SpatialIndex.build(cloud)
    n = cloud.n_points
    neighbor_idx, _ = index.knn(
        cloud.points, k, exclude=np.arange(n, dtype=np.int64), backend=backend
    )
    normals, flags = get_kernels(backend).pca_normals(cloud.points, neighbor_idx)
    if flags.any():
        bad = int(np.argmax(flags))
        raise NumericError(
            f"degenerate neighborhood at point {bad}: all {k} neighbors coincide"
        )
    return PointCloud(
        name=cloud.name,
        points=cloud.points,
        normals=normals,
        precision_bits=cloud.precision_bits,
    )
