"""Objective-subjective correlation harness.

Objective scores are mapped to the subjective scale through a least-squares
cubic, then judged by Pearson correlation (raw and after fitting), Spearman
rank correlation with average ranks for ties, and the RMSE of the fitted
predictions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .pc_io import MosRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegressionModel:
    """Cubic mapping mos_predicted = a + b*y + c*y^2 + d*y^3."""

    a: float
    b: float
    c: float
    d: float

    def predict(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return self.a + y * (self.b + y * (self.c + y * self.d))

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}


@dataclass(frozen=True)
class CorrelationReport:
    metric_label: str
    n: int
    excluded_infinite: int
    plcc_raw: float
    plcc_fitted: float
    srocc: float
    rmse: float
    model: RegressionModel

    def to_dict(self) -> dict:
        return {
            "metric_label": self.metric_label,
            "n": self.n,
            "excluded_infinite": self.excluded_infinite,
            "plcc_raw": self.plcc_raw,
            "plcc_fitted": self.plcc_fitted,
            "srocc": self.srocc,
            "rmse": self.rmse,
            "model": self.model.to_dict(),
        }


def _as_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("x and y must be 1D sequences of equal length")
    if x.shape[0] < 2:
        raise DataError("correlation needs at least 2 samples")
    return x, y


def plcc(x, y) -> float:
    """Sample Pearson correlation, clamped to [-1, 1] against fp overshoot."""
    x, y = _as_xy(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise NumericError("Pearson correlation is undefined for zero variance")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _average_ranks(a: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    order = np.argsort(a, kind="stable")
    sorted_a = a[order]
    ranks = np.empty(a.shape[0], dtype=np.float64)
    boundaries = np.flatnonzero(np.diff(sorted_a) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [a.shape[0]]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0  # mean of 1-based positions s+1..e
    return ranks


def srocc(x, y) -> float:
    """Spearman rank correlation: Pearson over average-rank vectors."""
    x, y = _as_xy(x, y)
    return plcc(_average_ranks(x), _average_ranks(y))


def fit_cubic(pairs) -> RegressionModel:
    """Least-squares cubic through (objective score, mos) pairs.

    The fit is solved on standardized scores to keep the Vandermonde system
    well conditioned, then the coefficients are mapped back to the raw
    scale. Fewer than 4 distinct score values make the cubic rank-deficient
    and raise ``NumericError``.
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError("pairs must be a sequence of (score, mos) tuples")
    if arr.shape[0] < 4:
        raise DataError(f"cubic fit needs at least 4 pairs; got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise DataError("cubic fit requires finite scores and mos values")
    y = arr[:, 0]
    mos = arr[:, 1]
    if np.unique(y).shape[0] < 4:
        raise NumericError(
            "cubic fit is rank-deficient: needs at least 4 distinct score values"
        )

    mu = y.mean()
    sd = y.std()
    z = (y - mu) / sd
    design = np.column_stack([np.ones_like(z), z, z * z, z * z * z])
    coef, *_ = np.linalg.lstsq(design, mos, rcond=None)

    # back-transform: evaluate the z-polynomial at (y - mu)/sd
    poly = np.polynomial.Polynomial(coef)(
        np.polynomial.Polynomial([-mu / sd, 1.0 / sd])
    )
    raw = np.zeros(4)
    raw[: poly.coef.shape[0]] = poly.coef
    return RegressionModel(*(float(v) for v in raw))


def rmse(model: RegressionModel, pairs) -> float:
    """Root mean squared residual of the model over (score, mos) pairs."""
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise DataError("pairs must be a non-empty sequence of (score, mos) tuples")
    resid = arr[:, 1] - model.predict(arr[:, 0])
    return float(np.sqrt(np.mean(resid * resid)))


def evaluate_metric(records: list[MosRecord], metric_label: str) -> CorrelationReport:
    """Correlate one objective-score column against MOS.

    Non-finite scores (infinite PSNR from lossless stimuli) are excluded and
    counted. Records are processed in stimulus_id order, so shuffled input
    yields a bit-identical report.
    """
    if not records:
        raise DataError("no records to evaluate")
    for rec in records:
        if metric_label not in rec.objective_scores:
            available = sorted({k for r in records for k in r.objective_scores})
            raise DataError(
                f"record '{rec.stimulus_id}' lacks objective score "
                f"'{metric_label}'; available: {available}"
            )
    ordered = sorted(records, key=lambda r: r.stimulus_id)
    y = np.array([r.objective_scores[metric_label] for r in ordered])
    mos = np.array([r.mos for r in ordered])

    finite = np.isfinite(y)
    excluded = int((~finite).sum())
    if excluded:
        log.info(
            "excluding %d non-finite '%s' scores from correlation", excluded, metric_label
        )
    y, mos = y[finite], mos[finite]
    if y.shape[0] < 4:
        raise NumericError(
            f"only {y.shape[0]} finite '{metric_label}' samples; need at least 4"
        )

    pairs = np.column_stack([y, mos])
    model = fit_cubic(pairs)
    return CorrelationReport(
        metric_label=metric_label,
        n=int(y.shape[0]),
        excluded_infinite=excluded,
        plcc_raw=plcc(y, mos),
        plcc_fitted=plcc(model.predict(y), mos),
        srocc=srocc(y, mos),
        rmse=rmse(model, pairs),
        model=model,
    )
