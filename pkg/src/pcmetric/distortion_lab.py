"""Desk-scale stand-ins for codec-like geometry distortions.

Octree pruning mimics tree-structured coding (bounded, evenly spread
errors), Gaussian jitter mimics diffuse noise, and outlier injection
reproduces the heavy-tailed error distribution of projection-based coding
where a handful of points land far from the surface. All generators are
deterministic under a fixed seed (numpy PCG64); cross-run determinism is
guaranteed, cross-implementation determinism is not a goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pc_io import PointCloud

# Deeper than this and the linear cell id overflows int64 (2^(3*depth) cells).
MAX_OCTREE_DEPTH = 20


def _bounding_cube(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Tight axis-aligned box expanded to a cube about its center."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    side = float((hi - lo).max())
    center = (lo + hi) / 2.0
    return center - side / 2.0, side


def octree_prune(cloud: PointCloud, depth: int) -> PointCloud:
    """Quantize points to the centers of an octree of the given depth.

    The bounding cube is subdivided uniformly into 2^depth cells per axis;
    every point maps to its cell center and duplicates collapse, so the
    output is at most as large as the input, lies on the cell-center
    lattice, and each output point sits within half a cell diagonal of some
    input point. Output order is ascending cell id. Normals are dropped.
    """
    if depth < 1:
        raise DataError(f"octree depth must be >= 1; got {depth}")
    if depth > MAX_OCTREE_DEPTH:
        raise DataError(f"octree depth must be <= {MAX_OCTREE_DEPTH}; got {depth}")
    pts = cloud.points
    origin, side = _bounding_cube(pts)
    name = f"{cloud.name}~octree{depth}"
    if side == 0.0:
        return PointCloud(name=name, points=pts[:1].copy(), precision_bits=cloud.precision_bits)
    r = 1 << depth
    cell = side / r
    ijk = np.floor((pts - origin) / cell).astype(np.int64)
    np.clip(ijk, 0, r - 1, out=ijk)
    ids = (ijk[:, 0] * r + ijk[:, 1]) * r + ijk[:, 2]
    uniq = np.unique(ids)
    ix, rem = np.divmod(uniq, r * r)
    iy, iz = np.divmod(rem, r)
    centers = origin + (np.column_stack([ix, iy, iz]) + 0.5) * cell
    return PointCloud(name=name, points=centers, precision_bits=cloud.precision_bits)


def gaussian_jitter(cloud: PointCloud, sigma: float, seed: int) -> PointCloud:
    """Add i.i.d. zero-mean Gaussian noise per coordinate."""
    if not (sigma > 0):
        raise DataError(f"sigma must be positive; got {sigma}")
    rng = np.random.default_rng(seed)
    pts = cloud.points + rng.normal(0.0, sigma, cloud.points.shape)
    return PointCloud(
        name=f"{cloud.name}~jitter",
        points=pts,
        normals=cloud.normals,
        precision_bits=cloud.precision_bits,
    )


def _outlier_count(fraction: float, n: int) -> int:
    # ceil(fraction*n), snapping near-integer products first so that
    # fraction=1/N moves exactly one point despite fp rounding
    t = round(fraction * n, 9)
    if t < 1.0:
        raise DataError(
            f"fraction*N must be at least 1; got {fraction} * {n} = {fraction * n:g}"
        )
    return math.ceil(t)


def inject_outliers(
    cloud: PointCloud, fraction: float, magnitude: float, seed: int
) -> PointCloud:
    """Displace ceil(fraction*N) uniformly chosen points by ``magnitude``
    along random unit directions. Exactly that many coordinates change."""
    if not (0.0 < fraction < 1.0):
        raise DataError(f"fraction must lie in (0, 1); got {fraction}")
    if not (magnitude > 0):
        raise DataError(f"magnitude must be positive; got {magnitude}")
    n = cloud.n_points
    count = _outlier_count(fraction, n)
    rng = np.random.default_rng(seed)
    sel = rng.choice(n, size=count, replace=False)
    dirs = rng.normal(size=(count, 3))
    norms = np.linalg.norm(dirs, axis=1)
    while (norms < 1e-12).any():  # astronomically rare; keep the stream deterministic
        redo = norms < 1e-12
        dirs[redo] = rng.normal(size=(int(redo.sum()), 3))
        norms = np.linalg.norm(dirs, axis=1)
    pts = cloud.points.copy()
    pts[sel] += magnitude * dirs / norms[:, None]
    return PointCloud(
        name=f"{cloud.name}~outliers",
        points=pts,
        normals=cloud.normals,
        precision_bits=cloud.precision_bits,
    )


@dataclass(frozen=True)
class DistortionSpec:
    """Serializable description of one distortion run."""

    method: str  # "octree" | "jitter" | "outliers"
    seed: int = 0
    depth: int | None = None
    sigma: float | None = None
    fraction: float | None = None
    magnitude: float | None = None

    def __post_init__(self):
        if self.method == "octree":
            if self.depth is None:
                raise DataError("octree distortion requires depth")
        elif self.method == "jitter":
            if self.sigma is None:
                raise DataError("jitter distortion requires sigma")
        elif self.method == "outliers":
            if self.fraction is None or self.magnitude is None:
                raise DataError("outlier distortion requires fraction and magnitude")
        else:
            raise DataError(f"unknown distortion method {self.method!r}")

    def apply(self, cloud: PointCloud) -> PointCloud:
        if self.method == "octree":
            return octree_prune(cloud, self.depth)
        if self.method == "jitter":
            return gaussian_jitter(cloud, self.sigma, self.seed)
        return inject_outliers(cloud, self.fraction, self.magnitude, self.seed)

    def to_dict(self) -> dict:
        out = {"method": self.method, "seed": self.seed, "rng": "numpy-pcg64"}
        for key in ("depth", "sigma", "fraction", "magnitude"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DistortionSpec":
        known = {"method", "seed", "depth", "sigma", "fraction", "magnitude"}
        return cls(**{k: v for k, v in data.items() if k in known})
