"""The metric core: directed error sets, reductions, pooling and PSNR.

All distances are squared Euclidean throughout; ranking on squared values
is order-equivalent to ranking on raw distances. A comparison runs in four
stages: per-point nearest-neighbor errors in each direction, a reduction
of each directed set (MSE or the K-th ranked value), pooling of the two
directed values, and conversion to dB against a signal peak. MSE reduction
with max pooling reproduces the point-to-point D1 PSNR and, on the
point-to-plane errors, D2 PSNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pc_io import PointCloud
from .spatial_index import SpatialIndex

KINDS = ("p2po", "p2pl")
REDUCTIONS = ("mse", "gh")
POOLINGS = ("min", "max", "avg", "wavg")

# Ranked-distance grid used when no explicit per list is given; the minimum
# entry (rank 1, i.e. per = 100/N) is added per comparison since it depends
# on the cloud sizes.
FIXED_PER_VALUES = (
    50.0,
    60.0,
    65.0,
    70.0,
    75.0,
    80.0,
    85.0,
    90.0,
    95.0,
    96.0,
    97.0,
    98.0,
    99.0,
    100.0,
)


def default_per_grid(*sizes: int) -> list[float]:
    """The default 15-value per grid for clouds of the given sizes.

    The first entry is 100/max(sizes), which selects rank 1 (the minimum
    distance) in every direction; the rest are the fixed percentages up to
    the classical-Hausdorff case per=100.
    """
    if not sizes or any(n < 1 for n in sizes):
        raise DataError("default_per_grid needs at least one positive cloud size")
    return [100.0 / max(sizes)] + list(FIXED_PER_VALUES)


@dataclass(frozen=True)
class MetricConfig:
    """One metric variant: distance kind, reduction, pooling and signal peak."""

    kind: str = "p2po"
    reduction: str = "mse"
    per: float | None = None
    pooling: str = "max"
    signal_peak: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"kind must be one of {KINDS}; got {self.kind!r}")
        if self.reduction not in REDUCTIONS:
            raise DataError(
                f"reduction must be one of {REDUCTIONS}; got {self.reduction!r}"
            )
        if self.pooling not in POOLINGS:
            raise DataError(
                f"pooling must be one of {POOLINGS}; got {self.pooling!r}"
            )
        if self.reduction == "gh":
            if self.per is None:
                raise DataError("reduction 'gh' requires a per value in (0, 100]")
            if not (0.0 < self.per <= 100.0):
                raise DataError(f"per must lie in (0, 100]; got {self.per}")
        elif self.per is not None:
            raise DataError("per is only meaningful for the 'gh' reduction")
        if not (self.signal_peak > 0):
            raise DataError(f"signal_peak must be positive; got {self.signal_peak}")

    @classmethod
    def d1(cls, signal_peak: float) -> "MetricConfig":
        """MPEG D1: point-to-point MSE with max pooling."""
        return cls("p2po", "mse", None, "max", signal_peak)

    @classmethod
    def d2(cls, signal_peak: float) -> "MetricConfig":
        """MPEG D2: point-to-plane MSE with max pooling."""
        return cls("p2pl", "mse", None, "max", signal_peak)


@dataclass(frozen=True)
class DirectedErrorSet:
    """Ascending-sorted per-point squared errors from one cloud toward another."""

    errors: np.ndarray
    source_size: int

    def __post_init__(self):
        errors = np.asarray(self.errors, dtype=np.float64)
        if errors.ndim != 1 or errors.shape[0] != self.source_size:
            raise DataError("error set length must equal source_size")
        if self.source_size < 1:
            raise DataError("source_size must be >= 1")
        if errors.shape[0] and (errors[0] < 0 or not np.isfinite(errors).all()):
            raise DataError("errors must be finite and non-negative")
        if (np.diff(errors) < 0).any():
            raise DataError("errors must be sorted ascending")
        object.__setattr__(self, "errors", errors)


@dataclass(frozen=True)
class QualityResult:
    directed_ab: float
    directed_ba: float
    undirected: float
    psnr_db: float  # math.inf for lossless comparisons
    config: MetricConfig

    def to_dict(self) -> dict:
        """Report row; an infinite PSNR serializes as null."""
        return {
            "kind": self.config.kind,
            "reduction": self.config.reduction,
            "per": self.config.per,
            "pooling": self.config.pooling,
            "d_ab": float(self.directed_ab),
            "d_ba": float(self.directed_ba),
            "undirected": float(self.undirected),
            "psnr_db": None if math.isinf(self.psnr_db) else float(self.psnr_db),
        }


def _check_index(reference: PointCloud, reference_index: SpatialIndex | None):
    if reference_index is None:
        return SpatialIndex.build(reference)
    if reference_index.cloud is not reference:
        raise DataError("reference_index was built over a different cloud")
    return reference_index


def per_point_errors(
    query: PointCloud,
    reference: PointCloud,
    kind: str = "p2po",
    reference_index: SpatialIndex | None = None,
    backend: str | None = None,
) -> np.ndarray:
    """Squared error of each query point toward the reference, in point order.

    p2po is the squared distance to the nearest reference point; p2pl
    projects the same error vector onto the unit normal at that nearest
    reference point and squares the projection, which requires the
    reference cloud to carry normals.
    """
    if kind not in KINDS:
        raise DataError(f"kind must be one of {KINDS}; got {kind!r}")
    index = _check_index(reference, reference_index)
    nn_idx, nn_sq = index.nearest_batch(query.points, backend=backend)
    if kind == "p2po":
        return nn_sq
    if reference.normals is None:
        raise DataError(
            "point-to-plane errors need normals on the reference cloud; "
            "load them or run estimate_normals first"
        )
    e = query.points - reference.points[nn_idx]
    n = reference.normals[nn_idx]
    proj = e[:, 0] * n[:, 0] + e[:, 1] * n[:, 1] + e[:, 2] * n[:, 2]
    return proj * proj


def directed_errors(
    query: PointCloud,
    reference: PointCloud,
    kind: str = "p2po",
    reference_index: SpatialIndex | None = None,
    backend: str | None = None,
) -> DirectedErrorSet:
    """Ascending-sorted squared errors of ``query`` toward ``reference``."""
    errors = per_point_errors(query, reference, kind, reference_index, backend)
    return DirectedErrorSet(np.sort(errors), query.n_points)


def reduce_mse(s: DirectedErrorSet) -> float:
    """Mean of the per-point squared errors (numpy's pairwise summation)."""
    return float(np.mean(s.errors))


def rank_from_per(per: float, n: int) -> int:
    """Map a percentage to a 1-based rank: round half away from zero, clamp to [1, n]."""
    if not (0.0 < per <= 100.0):
        raise DataError(f"per must lie in (0, 100]; got {per}")
    if n < 1:
        raise DataError(f"n must be >= 1; got {n}")
    k = math.floor(per * n / 100.0 + 0.5)
    return min(max(k, 1), n)


def reduce_gh(s: DirectedErrorSet, per: float) -> float:
    """The K-th smallest error, K = rank_from_per(per, N).

    per=100 is the classical Hausdorff value (the maximum) and per=100/N is
    the minimum.
    """
    return float(s.errors[rank_from_per(per, s.source_size) - 1])


def pool(d_ab: float, d_ba: float, pooling: str, n_a: int, n_b: int) -> float:
    """Combine the two directed distances into one undirected value.

    wavg is computed as w*d_ab + (1-w)*d_ba with w = n_a/(n_a+n_b), so equal
    cloud sizes reduce to the plain average bit-exactly.
    """
    if pooling == "min":
        return min(d_ab, d_ba)
    if pooling == "max":
        return max(d_ab, d_ba)
    if pooling == "avg":
        return (d_ab + d_ba) / 2.0
    if pooling == "wavg":
        w = n_a / (n_a + n_b)
        return w * d_ab + (1.0 - w) * d_ba
    raise DataError(f"pooling must be one of {POOLINGS}; got {pooling!r}")


def psnr(undirected: float, p: float) -> float:
    """10*log10(3*p^2 / undirected) in dB; zero distance maps to +infinity."""
    if undirected < 0:
        raise DataError(f"undirected distance must be >= 0; got {undirected}")
    if not (p > 0):
        raise DataError(f"signal peak must be positive; got {p}")
    if undirected == 0:
        return math.inf
    return 10.0 * math.log10(3.0 * p * p / undirected)


def _reduce(s: DirectedErrorSet, config: MetricConfig) -> float:
    if config.reduction == "mse":
        return reduce_mse(s)
    return reduce_gh(s, config.per)


def compute_metric(
    original: PointCloud,
    decoded: PointCloud,
    config: MetricConfig,
    original_index: SpatialIndex | None = None,
    decoded_index: SpatialIndex | None = None,
    backend: str | None = None,
) -> QualityResult:
    """Full pipeline for one configuration.

    Both directed error sets are computed (original toward decoded and back,
    each direction using the reference cloud's normals for p2pl), reduced,
    pooled with n_a = len(original) and n_b = len(decoded), and converted
    to PSNR.
    """
    decoded_index = _check_index(decoded, decoded_index)
    original_index = _check_index(original, original_index)
    s_ab = directed_errors(original, decoded, config.kind, decoded_index, backend)
    s_ba = directed_errors(decoded, original, config.kind, original_index, backend)
    d_ab = _reduce(s_ab, config)
    d_ba = _reduce(s_ba, config)
    undirected = pool(d_ab, d_ba, config.pooling, original.n_points, decoded.n_points)
    return QualityResult(d_ab, d_ba, undirected, psnr(undirected, config.signal_peak), config)


def metric_grid(
    original: PointCloud,
    decoded: PointCloud,
    signal_peak: float,
    kinds=KINDS,
    per_list=None,
    poolings=POOLINGS,
    backend: str | None = None,
) -> list[QualityResult]:
    """Every (kind, per, pooling) combination plus the MSE baselines.

    The nearest-neighbor pass runs once per direction and both error kinds
    are derived from it; each directed set is sorted once and every ranked
    reduction reads the same sorted array. Per kind the result list holds
    the MSE/max baseline (D1 or D2) followed by len(per_list) * len(poolings)
    ranked results, per ascending.
    """
    if per_list is None:
        per_list = default_per_grid(original.n_points, decoded.n_points)
    per_list = [float(p) for p in per_list]
    if not per_list:
        raise DataError("per_list must not be empty")

    decoded_index = SpatialIndex.build(decoded)
    original_index = SpatialIndex.build(original)
    n_a, n_b = original.n_points, decoded.n_points

    results: list[QualityResult] = []
    for kind in kinds:
        s_ab = directed_errors(original, decoded, kind, decoded_index, backend)
        s_ba = directed_errors(decoded, original, kind, original_index, backend)

        base = MetricConfig(kind, "mse", None, "max", signal_peak)
        d_ab, d_ba = reduce_mse(s_ab), reduce_mse(s_ba)
        u = pool(d_ab, d_ba, "max", n_a, n_b)
        results.append(QualityResult(d_ab, d_ba, u, psnr(u, signal_peak), base))

        for per in sorted(per_list):
            g_ab = reduce_gh(s_ab, per)
            g_ba = reduce_gh(s_ba, per)
            for pooling in poolings:
                cfg = MetricConfig(kind, "gh", per, pooling, signal_peak)
                u = pool(g_ab, g_ba, pooling, n_a, n_b)
                results.append(
                    QualityResult(g_ab, g_ba, u, psnr(u, signal_peak), cfg)
                )
    return results


def distance_profile(s: DirectedErrorSet, per_grid) -> list[tuple[float, float]]:
    """(per, K-th ranked squared error) for each grid value; nondecreasing in per."""
    return [(float(per), reduce_gh(s, per)) for per in per_grid]
