"""Geometry quality metrics for point clouds.

Compares an original and a decoded/distorted cloud through nearest-neighbor
squared errors, reduces them with MSE or ranked (generalized Hausdorff)
statistics, pools the two directed values and reports PSNR. Also ships a
small distortion lab for generating codec-like artifacts and a correlation
harness (cubic fit, PLCC/SROCC/RMSE) for scoring metrics against MOS data.
"""

from .errors import DataError, NumericError
from .pc_io import (
    MosRecord,
    PointCloud,
    export_error_heatmap,
    load_mos_table,
    load_ply,
    read_ply_fields,
    save_ply,
)
from .spatial_index import SpatialIndex
from .normal_estimation import estimate_normals
from .geometry_metrics import (
    DirectedErrorSet,
    MetricConfig,
    QualityResult,
    compute_metric,
    default_per_grid,
    directed_errors,
    distance_profile,
    metric_grid,
    per_point_errors,
    pool,
    psnr,
    rank_from_per,
    reduce_gh,
    reduce_mse,
)
from .distortion_lab import (
    DistortionSpec,
    gaussian_jitter,
    inject_outliers,
    octree_prune,
)
from .correlation import (
    CorrelationReport,
    RegressionModel,
    evaluate_metric,
    fit_cubic,
    plcc,
    rmse,
    srocc,
)

__version__ = "0.1.0"

__all__ = [
    "CorrelationReport",
    "DataError",
    "DirectedErrorSet",
    "DistortionSpec",
    "MetricConfig",
    "MosRecord",
    "NumericError",
    "PointCloud",
    "QualityResult",
    "RegressionModel",
    "SpatialIndex",
    "compute_metric",
    "default_per_grid",
    "directed_errors",
    "distance_profile",
    "estimate_normals",
    "evaluate_metric",
    "export_error_heatmap",
    "fit_cubic",
    "gaussian_jitter",
    "inject_outliers",
    "load_mos_table",
    "load_ply",
    "metric_grid",
    "octree_prune",
    "per_point_errors",
    "plcc",
    "pool",
    "psnr",
    "rank_from_per",
    "read_ply_fields",
    "reduce_gh",
    "reduce_mse",
    "rmse",
    "save_ply",
    "srocc",
]
