import math

import numpy as np
import pytest
import scipy.stats

from pcmetric import (
    DataError,
    MosRecord,
    NumericError,
    RegressionModel,
    evaluate_metric,
    fit_cubic,
    plcc,
    rmse,
    srocc,
)


def records_from(ys, moss, label="m"):
    return [
        MosRecord(f"s{i:03d}", float(m), {label: float(y)})
        for i, (y, m) in enumerate(zip(ys, moss))
    ]


# ---------------------------------------------------------------------------
# cubic fit
# ---------------------------------------------------------------------------


def test_fit_recovers_known_coefficients():
    a, b, c, d = 1.0, 0.5, -0.01, 0.001
    y = np.linspace(1.0, 20.0, 20)
    mos = a + b * y + c * y**2 + d * y**3
    model = fit_cubic(np.column_stack([y, mos]))
    assert model.a == pytest.approx(a, abs=1e-6)
    assert model.b == pytest.approx(b, abs=1e-6)
    assert model.c == pytest.approx(c, abs=1e-6)
    assert model.d == pytest.approx(d, abs=1e-6)
    assert rmse(model, np.column_stack([y, mos])) < 1e-9


def test_fit_constant_target():
    y = np.linspace(0.0, 9.0, 10)
    mos = np.full(10, 3.75)
    model = fit_cubic(np.column_stack([y, mos]))
    assert model.a == pytest.approx(3.75, abs=1e-9)
    for coef in (model.b, model.c, model.d):
        assert coef == pytest.approx(0.0, abs=1e-9)


def test_fit_four_points_interpolates():
    y = np.array([0.0, 1.0, 2.0, 4.0])
    mos = np.array([1.0, -1.0, 3.0, 0.5])
    model = fit_cubic(np.column_stack([y, mos]))
    assert rmse(model, np.column_stack([y, mos])) < 1e-8


def test_fit_rank_deficient():
    y = np.array([1.0, 1.0, 2.0, 3.0, 2.0])
    mos = np.arange(5.0)
    with pytest.raises(NumericError, match="distinct"):
        fit_cubic(np.column_stack([y, mos]))
    with pytest.raises(DataError, match="at least 4"):
        fit_cubic([(1.0, 1.0), (2.0, 2.0), (3.0, 1.5)])


def test_cubic_never_worse_than_linear():
    rng = np.random.default_rng(0)
    for _ in range(10):
        y = rng.random(30) * 10
        mos = rng.random(30) * 5
        model = fit_cubic(np.column_stack([y, mos]))
        cubic_rmse = rmse(model, np.column_stack([y, mos]))
        slope, intercept = np.polyfit(y, mos, 1)
        linear_rmse = float(np.sqrt(np.mean((mos - (slope * y + intercept)) ** 2)))
        assert cubic_rmse <= linear_rmse + 1e-12


# ---------------------------------------------------------------------------
# plcc / srocc / rmse
# ---------------------------------------------------------------------------


def test_plcc_basics():
    x = np.arange(10.0)
    assert plcc(x, 2 * x + 1) == 1.0
    assert plcc(x, -x) == -1.0
    # hand evaluation of the sample formula
    assert plcc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)


def test_plcc_affine_invariance():
    rng = np.random.default_rng(1)
    x = rng.random(50)
    y = rng.random(50)
    base = plcc(x, y)
    assert plcc(3.0 * x + 7.0, y) == pytest.approx(base, abs=1e-12)
    assert plcc(x, 0.5 * y - 2.0) == pytest.approx(base, abs=1e-12)


def test_plcc_zero_variance():
    with pytest.raises(NumericError, match="variance"):
        plcc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_plcc_against_scipy():
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.random(40)
        y = rng.random(40)
        assert plcc(x, y) == pytest.approx(scipy.stats.pearsonr(x, y)[0], abs=1e-12)


def test_srocc_monotone_transforms():
    rng = np.random.default_rng(3)
    x = rng.random(60)
    assert srocc(x, np.exp(x)) == 1.0
    assert srocc(x, x**3 + 5) == 1.0
    assert srocc(x, -x) == -1.0
    order = np.argsort(x)
    assert srocc(x[order], x[order][::-1]) == -1.0


def test_srocc_tie_handling_hand_case():
    # ranks of x are [1, 2.5, 2.5, 4]; Pearson of the rank vectors by hand
    assert srocc([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(
        0.9486832980505138, abs=1e-12
    )


def test_srocc_against_scipy_with_ties():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.integers(0, 8, size=50).astype(float)  # plenty of ties
        y = rng.integers(0, 8, size=50).astype(float)
        if np.unique(x).size < 2 or np.unique(y).size < 2:
            continue
        assert srocc(x, y) == pytest.approx(
            scipy.stats.spearmanr(x, y).statistic, abs=1e-12
        )


def test_srocc_all_equal_rejected():
    with pytest.raises(NumericError):
        srocc([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


def test_rmse_exact_and_constant_residual():
    model = RegressionModel(0.5, 1.0, 0.0, 0.2)
    y = np.linspace(-2, 2, 25)
    exact = np.column_stack([y, model.predict(y)])
    assert rmse(model, exact) == 0.0
    shifted = np.column_stack([y, model.predict(y) - 0.73])
    assert rmse(model, shifted) == pytest.approx(0.73, rel=1e-12)


def test_rmse_recovers_noise_scale():
    rng = np.random.default_rng(5)
    sigma = 0.4
    y = rng.random(10_000) * 10
    mos = 1.0 + 0.3 * y + rng.normal(0.0, sigma, size=y.shape)
    model = fit_cubic(np.column_stack([y, mos]))
    assert rmse(model, np.column_stack([y, mos])) == pytest.approx(sigma, rel=0.05)


# ---------------------------------------------------------------------------
# evaluate_metric
# ---------------------------------------------------------------------------


def test_perfect_linear_metric():
    y = np.linspace(40.0, 80.0, 30)
    mos = 0.1 * y - 2.0
    report = evaluate_metric(records_from(y, mos), "m")
    assert report.plcc_raw == pytest.approx(1.0, abs=1e-9)
    assert report.plcc_fitted == pytest.approx(1.0, abs=1e-9)
    assert report.srocc == 1.0
    assert report.rmse < 1e-9
    assert report.n == 30
    assert report.excluded_infinite == 0


def test_permuted_scores_show_no_correlation():
    rng = np.random.default_rng(6)
    y = np.linspace(0.0, 10.0, 100)
    mos = rng.permutation(y)
    report = evaluate_metric(records_from(y, mos), "m")
    assert abs(report.plcc_raw) < 0.3
    assert abs(report.srocc) < 0.3


def test_monotone_nonlinear_relation():
    y = np.linspace(1.0, 60.0, 40)
    mos = np.log(y)
    report = evaluate_metric(records_from(y, mos), "m")
    assert report.srocc == 1.0
    assert report.plcc_raw < 1.0
    assert report.plcc_fitted > report.plcc_raw


def test_infinite_scores_excluded_and_counted():
    y = np.array([50.0, 55.0, 60.0, 65.0, math.inf, math.inf])
    mos = np.array([2.0, 3.0, 4.0, 4.5, 5.0, 5.0])
    report = evaluate_metric(records_from(y, mos), "m")
    assert report.excluded_infinite == 2
    assert report.n == 4


def test_too_few_finite_samples():
    y = [50.0, 51.0, 52.0, math.inf, math.inf]
    mos = [1.0, 2.0, 3.0, 4.0, 5.0]
    with pytest.raises(NumericError, match="finite"):
        evaluate_metric(records_from(y, mos), "m")


def test_missing_label_lists_columns():
    records = records_from([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0], label="d1")
    with pytest.raises(DataError, match=r"available: \['d1'\]"):
        evaluate_metric(records, "nope")


def test_record_order_does_not_matter():
    rng = np.random.default_rng(7)
    y = rng.random(25) * 60
    mos = 0.05 * y + rng.normal(0, 0.2, 25)
    records = records_from(y, mos)
    a = evaluate_metric(records, "m")
    b = evaluate_metric(list(reversed(records)), "m")
    c = evaluate_metric([records[i] for i in rng.permutation(25)], "m")
    assert a == b == c
