import math

import numpy as np
import pytest

from pcmetric import (
    DataError,
    DirectedErrorSet,
    MetricConfig,
    PointCloud,
    SpatialIndex,
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

from conftest import make_cloud, lattice_cloud

A2 = PointCloud("A", [[0.0, 0, 0], [1.0, 0, 0]])
B2 = PointCloud("B", [[0.0, 0, 0], [3.0, 0, 0]])


def error_set(values):
    values = np.sort(np.asarray(values, dtype=np.float64))
    return DirectedErrorSet(values, len(values))


def brute_directed(query_pts, ref_pts, ref_normals=None):
    """Independent O(N*M) oracle for per-point squared errors."""
    out = np.empty(len(query_pts))
    for i, q in enumerate(query_pts):
        diff = ref_pts - q
        d = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
        j = int(np.argmin(d))
        if ref_normals is None:
            out[i] = d[j]
        else:
            out[i] = float(np.dot(q - ref_pts[j], ref_normals[j])) ** 2
    return out


def brute_psnr(a, b, peak, kind="p2po"):
    na = a.normals if kind == "p2pl" else None
    nb = b.normals if kind == "p2pl" else None
    mse_ab = brute_directed(a.points, b.points, nb).mean()
    mse_ba = brute_directed(b.points, a.points, na).mean()
    u = max(mse_ab, mse_ba)
    return math.inf if u == 0 else 10 * math.log10(3 * peak * peak / u)


# ---------------------------------------------------------------------------
# directed errors
# ---------------------------------------------------------------------------


def test_identical_clouds_zero_errors():
    cloud = make_cloud(200, seed=0)
    s = directed_errors(cloud, cloud, "p2po")
    assert (s.errors == 0.0).all()
    assert s.source_size == 200


def test_two_point_hand_example():
    assert directed_errors(A2, B2, "p2po").errors.tolist() == [0.0, 1.0]
    assert directed_errors(B2, A2, "p2po").errors.tolist() == [0.0, 4.0]


def test_p2pl_orthogonal_error_vanishes():
    ref = PointCloud("ref", [[0.0, 0, 0]], normals=[[0.0, 0, 1]])
    query = PointCloud("q", [[1.0, 1.0, 0.0]])
    assert per_point_errors(query, ref, "p2pl").tolist() == [0.0]


def test_p2pl_requires_reference_normals():
    with pytest.raises(DataError, match="normals"):
        directed_errors(A2, B2, "p2pl")


def test_p2pl_uses_normal_at_nearest_reference_point():
    ref = PointCloud(
        "ref",
        [[0.0, 0, 0], [10.0, 0, 0]],
        normals=[[1.0, 0, 0], [0.0, 0, 1]],
    )
    query = PointCloud("q", [[9.0, 2.0, 3.0]])
    # nearest reference point is index 1, normal (0,0,1) -> error = 3^2
    assert per_point_errors(query, ref, "p2pl").tolist() == [9.0]


def test_wrong_index_rejected():
    idx = SpatialIndex.build(A2)
    with pytest.raises(DataError, match="different cloud"):
        directed_errors(A2, B2, "p2po", reference_index=idx)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def test_reduce_mse_hand_values():
    assert reduce_mse(error_set([0, 1])) == 0.5
    assert reduce_mse(error_set([0, 4])) == 2.0
    assert reduce_mse(error_set(np.zeros(17))) == 0.0


def test_rank_from_per():
    assert rank_from_per(80.0, 600) == 480
    assert rank_from_per(100.0, 1) == 1
    assert rank_from_per(100.0, 12345) == 12345
    assert rank_from_per(100.0 / 37.0, 37) == 1
    assert rank_from_per(62.5, 4) == 3  # 2.5 rounds away from zero
    assert rank_from_per(1e-9, 1000) == 1  # clamped to the bottom
    with pytest.raises(DataError):
        rank_from_per(0.0, 10)
    with pytest.raises(DataError):
        rank_from_per(100.5, 10)


def test_reduce_gh_hand_values():
    s = error_set([0, 1, 4, 9])
    assert reduce_gh(s, 100.0) == 9.0  # classical Hausdorff
    assert reduce_gh(s, 75.0) == 4.0  # K = round(3) = 3
    assert reduce_gh(s, 100.0 / 4.0) == 0.0


def test_reduce_gh_boundaries_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 400))
        s = error_set(rng.random(n) * 50)
        assert reduce_gh(s, 100.0) == s.errors[-1] == s.errors.max()
        assert reduce_gh(s, 100.0 / n) == s.errors[0] == s.errors.min()


def test_reduce_gh_monotone_in_per():
    rng = np.random.default_rng(2)
    grid = default_per_grid(777)
    for _ in range(50):
        s = error_set(rng.random(777))
        values = [reduce_gh(s, per) for per in grid]
        assert (np.diff(values) >= 0).all()


def test_outlier_moves_only_the_top_rank():
    query = make_cloud(300, seed=3)
    ref = make_cloud(250, seed=4)
    errors = per_point_errors(query, ref, "p2po")
    j = int(np.argmax(errors))  # displace the current worst query point
    moved = query.points.copy()
    moved[j] = [1e4, 1e4, 1e4]
    s_before = directed_errors(query, ref, "p2po")
    s_after = directed_errors(PointCloud("m", moved), ref, "p2po")
    n = s_before.source_size
    for per in default_per_grid(n):
        if rank_from_per(per, n) < n:
            assert reduce_gh(s_after, per) == reduce_gh(s_before, per)
    assert reduce_gh(s_after, 100.0) > reduce_gh(s_before, 100.0)


# ---------------------------------------------------------------------------
# pooling and psnr
# ---------------------------------------------------------------------------


def test_pool_hand_values():
    assert pool(0.5, 2.0, "max", 2, 2) == 2.0
    assert pool(0.5, 2.0, "min", 2, 2) == 0.5
    assert pool(0.5, 2.0, "avg", 2, 2) == 1.25
    assert pool(0.5, 2.0, "wavg", 2, 2) == 1.25
    assert pool(1.0, 2.0, "wavg", 3, 1) == 1.25  # (3*1 + 1*2)/4


def test_pool_symmetric_input():
    for pooling in ("min", "max", "avg", "wavg"):
        assert pool(3.25, 3.25, pooling, 7, 13) == 3.25


def test_pool_ordering_random():
    rng = np.random.default_rng(5)
    for _ in range(2000):
        d_ab, d_ba = rng.random(2) * 100
        n_a, n_b = rng.integers(1, 10**6, size=2)
        lo = pool(d_ab, d_ba, "min", n_a, n_b)
        hi = pool(d_ab, d_ba, "max", n_a, n_b)
        assert lo <= pool(d_ab, d_ba, "avg", n_a, n_b) <= hi
        assert lo <= pool(d_ab, d_ba, "wavg", n_a, n_b) <= hi


def test_wavg_equals_avg_for_equal_sizes():
    rng = np.random.default_rng(6)
    for _ in range(500):
        d_ab, d_ba = rng.random(2) * 1e6
        n = int(rng.integers(1, 10**7))
        assert pool(d_ab, d_ba, "wavg", n, n) == pool(d_ab, d_ba, "avg", n, n)


def test_psnr_values():
    assert psnr(3.0 * 7.5**2, 7.5) == 0.0
    assert psnr(1.0, 1023.0) == pytest.approx(64.96872522143983, rel=1e-12)
    assert psnr(0.0, 1023.0) == math.inf
    with pytest.raises(DataError):
        psnr(-1.0, 1.0)
    with pytest.raises(DataError):
        psnr(1.0, 0.0)


def test_psnr_strictly_decreasing():
    values = np.sort(np.random.default_rng(7).random(100) * 10 + 1e-6)
    db = [psnr(v, 255.0) for v in values]
    assert (np.diff(db) < 0).all()


# ---------------------------------------------------------------------------
# compute_metric
# ---------------------------------------------------------------------------


def test_identical_clouds_infinite_psnr():
    cloud = make_cloud(150, seed=8, with_normals=True)
    for cfg in (
        MetricConfig.d1(1023.0),
        MetricConfig.d2(1023.0),
        MetricConfig("p2po", "gh", 98.0, "avg", 1023.0),
        MetricConfig("p2pl", "gh", 100.0, "min", 1023.0),
    ):
        assert compute_metric(cloud, cloud, cfg).psnr_db == math.inf


def test_two_point_chain():
    result = compute_metric(A2, B2, MetricConfig.d1(1.0))
    assert result.directed_ab == 0.5
    assert result.directed_ba == 2.0
    assert result.undirected == 2.0
    assert result.psnr_db == pytest.approx(1.7609125905568124, rel=1e-12)


def test_gh100_max_equals_classical_hausdorff():
    a = make_cloud(300, seed=9)
    b = make_cloud(280, seed=10)
    result = compute_metric(a, b, MetricConfig("p2po", "gh", 100.0, "max", 255.0))
    s_ab = directed_errors(a, b, "p2po")
    s_ba = directed_errors(b, a, "p2po")
    assert result.undirected == max(s_ab.errors[-1], s_ba.errors[-1])


def test_mse_matches_brute_force_oracle():
    for seed in range(5):
        a = make_cloud(int(np.random.default_rng(seed).integers(20, 500)),
                       seed=seed, with_normals=True)
        b = make_cloud(int(np.random.default_rng(seed + 100).integers(20, 500)),
                       seed=seed + 100, with_normals=True)
        for kind, cfg in (("p2po", MetricConfig.d1(255.0)), ("p2pl", MetricConfig.d2(255.0))):
            got = compute_metric(a, b, cfg).psnr_db
            want = brute_psnr(a, b, 255.0, kind)
            assert got == pytest.approx(want, rel=1e-9)


def test_translation_of_both_clouds_is_exact_on_grids():
    a = lattice_cloud(6)
    b = PointCloud("b", a.points[::3] + 1.0)
    shift = np.array([17.0, -8.0, 3.0])
    cfg = MetricConfig("p2po", "gh", 95.0, "wavg", 1023.0)
    r1 = compute_metric(a, b, cfg)
    r2 = compute_metric(
        PointCloud("a2", a.points + shift), PointCloud("b2", b.points + shift), cfg
    )
    assert r1.undirected == r2.undirected
    assert r1.psnr_db == r2.psnr_db


def test_translation_of_both_clouds_random():
    a = make_cloud(200, seed=11)
    b = make_cloud(180, seed=12)
    shift = np.array([5.0, 6.0, 7.0])
    cfg = MetricConfig.d1(255.0)
    r1 = compute_metric(a, b, cfg)
    r2 = compute_metric(
        PointCloud("a2", a.points + shift), PointCloud("b2", b.points + shift), cfg
    )
    assert r1.psnr_db == pytest.approx(r2.psnr_db, rel=1e-9)


def test_p2pl_bounded_by_p2po():
    a = make_cloud(300, seed=13, with_normals=True)
    b = make_cloud(260, seed=14, with_normals=True)
    for query, ref in ((a, b), (b, a)):
        e_pl = per_point_errors(query, ref, "p2pl")
        e_po = per_point_errors(query, ref, "p2po")
        assert (e_pl <= e_po).all()
    d1 = compute_metric(a, b, MetricConfig.d1(255.0)).psnr_db
    d2 = compute_metric(a, b, MetricConfig.d2(255.0)).psnr_db
    assert d2 >= d1


# ---------------------------------------------------------------------------
# metric grid and profiles
# ---------------------------------------------------------------------------


def test_metric_grid_default_shape():
    a = make_cloud(200, seed=15, with_normals=True)
    b = make_cloud(190, seed=16, with_normals=True)
    results = metric_grid(a, b, signal_peak=255.0)
    assert len(results) == 2 * (15 * 4 + 1)
    mse_rows = [r for r in results if r.config.reduction == "mse"]
    assert len(mse_rows) == 2
    assert {r.config.kind for r in mse_rows} == {"p2po", "p2pl"}


def test_metric_grid_identical_clouds_all_infinite():
    cloud = make_cloud(120, seed=17, with_normals=True)
    results = metric_grid(cloud, cloud, signal_peak=1023.0)
    assert all(r.psnr_db == math.inf for r in results)


def test_metric_grid_consistent_with_standalone_calls():
    a = make_cloud(150, seed=18)
    b = make_cloud(140, seed=19)
    results = metric_grid(a, b, signal_peak=255.0, kinds=("p2po",))
    row = next(
        r
        for r in results
        if r.config.reduction == "gh"
        and r.config.per == 100.0
        and r.config.pooling == "max"
    )
    standalone = compute_metric(a, b, MetricConfig("p2po", "gh", 100.0, "max", 255.0))
    assert row.undirected == standalone.undirected
    assert row.psnr_db == standalone.psnr_db


def test_metric_grid_min_entry_selects_rank_one():
    a = make_cloud(150, seed=20)
    b = make_cloud(90, seed=21)
    results = metric_grid(a, b, signal_peak=255.0, kinds=("p2po",))
    per_min = 100.0 / 150
    row = next(
        r for r in results if r.config.per == per_min and r.config.pooling == "min"
    )
    s_ab = directed_errors(a, b, "p2po")
    s_ba = directed_errors(b, a, "p2po")
    assert row.directed_ab == s_ab.errors[0]
    assert row.directed_ba == s_ba.errors[0]


def test_default_per_grid():
    grid = default_per_grid(600)
    assert len(grid) == 15
    assert grid[0] == 100.0 / 600
    assert grid[-1] == 100.0
    assert default_per_grid(100, 400)[0] == 0.25
    with pytest.raises(DataError):
        default_per_grid()


def test_distance_profile_hand_case():
    s = error_set([0, 1, 4, 9])
    profile = distance_profile(s, [25.0, 50.0, 75.0, 100.0])
    assert [v for _, v in profile] == [0.0, 1.0, 4.0, 9.0]


def test_distance_profile_flat_and_monotone():
    flat = distance_profile(error_set(np.full(50, 2.5)), default_per_grid(50))
    assert {v for _, v in flat} == {2.5}
    rng = np.random.default_rng(22)
    s = error_set(rng.random(333))
    values = [v for _, v in distance_profile(s, default_per_grid(333))]
    assert (np.diff(values) >= 0).all()


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------


def test_metric_config_validation():
    with pytest.raises(DataError):
        MetricConfig("p2pt", "mse", None, "max", 1.0)
    with pytest.raises(DataError):
        MetricConfig("p2po", "gh", None, "max", 1.0)
    with pytest.raises(DataError):
        MetricConfig("p2po", "gh", 0.0, "max", 1.0)
    with pytest.raises(DataError):
        MetricConfig("p2po", "mse", 50.0, "max", 1.0)
    with pytest.raises(DataError):
        MetricConfig("p2po", "mse", None, "max", 0.0)
    with pytest.raises(DataError):
        DirectedErrorSet(np.array([1.0, 0.0]), 2)  # not sorted
