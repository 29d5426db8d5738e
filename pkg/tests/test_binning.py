import numpy as np
import pytest

from dcinv.binning import (
    UnreachableCellError,
    classify,
    distribute_cell_weights,
    make_kmeans,
    make_regular_grid,
    pushforward_binned,
    solve_binning,
    solve_naive,
)
from dcinv.core import BoxScaler, SampleSet
from dcinv.edf import sup_distance, wedf_eval_many
from dcinv.models import HeatRod, UniformBoxSampler, heat_rod_observed
from dcinv.targets import EmpiricalTarget, UniformTarget


def test_grid_reps_unit_box():
    part = make_regular_grid(BoxScaler([0.0], [1.0]), 4)
    assert np.allclose(part.reps.points[:, 0], [0.125, 0.375, 0.625, 0.875])


def test_grid_reps_wider_box():
    part = make_regular_grid(BoxScaler([0.0], [2.0]), 2)
    assert np.allclose(part.reps.points[:, 0], [0.5, 1.5])


def test_grid_classify_half_open():
    part = make_regular_grid(BoxScaler([0.0], [1.0]), 4)
    assert classify(part, [0.25]) == 1  # 0.25 lies in [0.25, 0.5)
    assert classify(part, [0.99]) == 3
    assert classify(part, [1.7]) == 3  # outside the box clamps to the last cell
    assert classify(part, [-0.5]) == 0


def test_grid_classify_2d_order():
    part = make_regular_grid(BoxScaler([0.0, 0.0], [1.0, 1.0]), (2, 3))
    assert part.p == 6
    reps = part.reps.points
    idx = part.classify_many(reps)
    assert np.array_equal(idx, np.arange(6))  # reps classify to their own cells


def test_kmeans_two_cluster_optimum():
    part = make_kmeans(np.array([0.0, 0.1, 0.9, 1.0]), p=2, seed=0)
    cents = np.sort(part.centroids.points[:, 0])
    assert np.allclose(cents, [0.05, 0.95])


def test_kmeans_p_equals_n():
    pts = np.array([0.1, 0.4, 0.7, 0.95])
    part = make_kmeans(pts, p=4, seed=1)
    assert part.inertia == pytest.approx(0.0, abs=1e-30)
    assert np.allclose(np.sort(part.centroids.points[:, 0]), pts)


def test_kmeans_inertia_non_increasing():
    rng = np.random.default_rng(3)
    part = make_kmeans(rng.uniform(size=(300, 2)), p=7, seed=4)
    hist = np.array(part.inertia_history)
    assert np.all(np.diff(hist) <= 1e-12)


def test_kmeans_tie_breaks_to_lowest_index():
    part = make_kmeans(np.array([0.0, 0.1, 0.9, 1.0]), p=2, seed=0)
    cents = part.centroids.points[:, 0]
    midpoint = np.array([[np.mean(cents)]])
    assert classify(part, midpoint[0]) == 0


def test_kmeans_requires_distinct_points():
    with pytest.raises(ValueError):
        make_kmeans(np.array([0.5, 0.5, 0.5]), p=2, seed=0)


def test_kmeans_reproducible():
    rng = np.random.default_rng(5)
    pts = rng.uniform(size=(200, 1))
    a = make_kmeans(pts, p=9, seed=11)
    b = make_kmeans(pts, p=9, seed=11)
    assert np.array_equal(a.centroids.points, b.centroids.points)


def test_distribute_hand_case():
    # p=2, w={0.5,1.5}, 4 samples with 2 per cell -> u = {0.125,0.125,0.375,0.375}
    u, w_f, counts, dropped = distribute_cell_weights(
        np.array([0.5, 1.5]), np.array([0, 0, 1, 1]), p=2
    )
    assert np.allclose(u, [0.125, 0.125, 0.375, 0.375])
    assert u.sum() == pytest.approx(1.0, abs=1e-12)
    assert dropped == 0.0


def test_distribute_floors_tiny_weights():
    u, w_f, counts, dropped = distribute_cell_weights(
        np.array([1e-9, 2.0 - 1e-9]), np.array([0, 0, 1, 1]), p=2, weight_floor=1e-6
    )
    assert np.all(u[:2] == 0.0)
    assert u.sum() == pytest.approx(1.0, abs=1e-12)
    assert w_f[0] == 0.0


def test_distribute_unreachable_strict():
    with pytest.raises(UnreachableCellError, match="cell 1"):
        distribute_cell_weights(np.array([1.0, 1.0]), np.array([0, 0]), p=2)
    u, w_f, counts, dropped = distribute_cell_weights(
        np.array([1.0, 1.0]), np.array([0, 0]), p=2, strict=False
    )
    assert dropped == pytest.approx(0.5)


def unit_identity_model(pts):
    return pts[:, 0]


def test_solve_binning_structure_and_pushforward_identity():
    sampler = UniformBoxSampler(BoxScaler([0.0], [1.0]))
    sol = solve_binning(
        unit_identity_model,
        sampler,
        UniformTarget(0.0, 1.0),
        ("grid", 8),
        n_target=4000,
        seed=12,
    )
    u = sol.sample_weights.weights
    w = sol.cell_weights.weights
    # sum-one, equal weights within cells, exact aggregation identity
    assert abs(u.sum() - 1.0) < 1e-12
    for k in range(sol.p):
        in_cell = u[sol.assignments == k]
        if in_cell.size:
            assert np.ptp(in_cell) == 0.0
            assert abs(in_cell.sum() - w[k] / sol.p) < 1e-12
    # identical target and predicted distribution: weights near one
    assert np.max(np.abs(w - 1.0)) < 0.4
    # push-forward through the classifier equals the rep-weighted EDF exactly
    pf = pushforward_binned(sol)
    reps = sol.partition.reps.points
    mapped = reps[sol.assignments]
    queries = np.linspace(-0.1, 1.1, 37)[:, None]
    lhs = wedf_eval_many(pf, queries)
    rhs = (u[None, :] * (mapped[None, :, 0] <= queries)).sum(axis=1)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_solve_binning_p_one():
    sampler = UniformBoxSampler(BoxScaler([0.0], [1.0]))
    sol = solve_binning(
        unit_identity_model, sampler, UniformTarget(0.0, 1.0), ("grid", 1),
        n_target=50, seed=3,
    )
    pf = pushforward_binned(sol)
    assert pf.eval([2.0]) == pytest.approx(1.0)
    assert sol.cell_weights.weights[0] == pytest.approx(1.0)


def gap_model(pts):
    # outputs never land in (0.4, 0.9): an unreachable band for any target
    x = pts[:, 0]
    return np.where(x < 0.4, x, x + 0.5)


def test_solve_binning_unreachable_cell_aborts():
    sampler = UniformBoxSampler(BoxScaler([0.0], [1.0]))
    with pytest.raises(UnreachableCellError):
        solve_binning(
            gap_model,
            sampler,
            UniformTarget(0.0, 1.5),
            ("grid", 30),
            n_target=600,
            seed=7,
            max_batches=3,
        )


def test_solve_binning_fill_loop_grows_samples():
    sampler = UniformBoxSampler(BoxScaler([0.0], [1.0]))
    # target concentrated near the upper edge forces high minimum counts there
    sol = solve_binning(
        unit_identity_model,
        sampler,
        UniformTarget(0.9, 1.0),
        ("grid", 10),
        n_target=500,
        seed=9,
        n_batch=500,
    )
    assert sol.n >= 500
    deficient = sol.counts < sol.n_min
    assert not deficient.any()
    if sol.n_batches > 0:
        assert sol.n > 500


def test_solve_binning_kmeans_partition():
    sampler = UniformBoxSampler(BoxScaler([0.0], [1.0]))
    sol = solve_binning(
        unit_identity_model, sampler, UniformTarget(0.0, 1.0), ("kmeans", 12),
        n_target=2000, seed=21,
    )
    assert sol.partition.kind == "kmeans"
    assert abs(sol.sample_weights.weights.sum() - 1.0) < 1e-12


def test_solve_binning_precomputed_pairs():
    rng = np.random.default_rng(31)
    lam = rng.uniform(size=(800, 1))
    q = lam[:, 0] * 2.0
    sol = solve_binning(
        None, None, UniformTarget(0.0, 2.0), ("grid", 6),
        n_target=800, seed=0,
        initial_samples=lam, predicted_samples=q,
    )
    assert sol.n == 800
    assert sol.n_batches == 0


def test_solve_binning_heat_rod_improves_pushforward():
    model = HeatRod()
    sampler = UniformBoxSampler(model.box)
    target = heat_rod_observed()
    sol = solve_binning(
        model, sampler, target, ("grid", 30), n_target=800, seed=17,
        min_fill="none",
    )
    cdf = lambda pts: target.cdf(pts[:, 0])
    err_binned = sup_distance(
        sol.pushforward_samples(), cdf, sol.box, grid_per_dim=2048,
        extra_points=sol.predicted.points,
    )
    from dcinv.core import WeightedEdf

    err_plain = sup_distance(
        WeightedEdf.plain(sol.predicted), cdf, sol.box, grid_per_dim=2048,
        extra_points=sol.predicted.points,
    )
    assert err_binned < err_plain


def test_naive_identity_target_all_ones():
    rng = np.random.default_rng(41)
    lam = rng.uniform(size=(60, 2))
    q = lam[:, 0] + 0.3 * lam[:, 1]
    sol = solve_naive(None, lam, EmpiricalTarget(q[:, None]), predicted_samples=q)
    assert np.max(np.abs(sol.weights.weights - 1.0)) < 1e-6


def test_naive_single_sample():
    with pytest.warns(UserWarning, match="zero-width"):
        sol = solve_naive(None, np.array([[0.5]]), UniformTarget(0.0, 1.0),
                          predicted_samples=np.array([[0.4]]))
    assert sol.weights.weights[0] == pytest.approx(1.0)


def test_naive_variance_exceeds_binning_on_heat_rod():
    model = HeatRod()
    sampler = UniformBoxSampler(model.box)
    target = heat_rod_observed()
    n = 400
    rng = np.random.default_rng(53)
    initial = sampler.sample(n, rng)
    naive = solve_naive(model, initial, target)
    binned = solve_binning(
        model, None, target, ("grid", 25), n_target=n, seed=0,
        initial_samples=initial, min_fill="none",
    )
    var_naive = np.var(naive.weights.weights)
    var_binned = np.var(n * binned.sample_weights.weights)
    assert var_naive > var_binned


def test_classifier_total_on_random_points():
    rng = np.random.default_rng(61)
    grid = make_regular_grid(BoxScaler([0.0, 0.0], [1.0, 1.0]), (5, 7))
    km = make_kmeans(rng.uniform(size=(400, 2)), p=13, seed=2)
    pts = rng.normal(0.5, 2.0, size=(100_000, 2))
    for part in (grid, km):
        idx = part.classify_many(pts)
        assert idx.min() >= 0 and idx.max() < part.p


def test_min_fill_policies():
    from dcinv.binning import at_least_one_min_fill, proportional_min_fill

    w = np.array([0.0, 1e-9, 0.4, 2.6])
    prop = proportional_min_fill(w, p=4, n_target=100)
    assert np.array_equal(prop, [0, 0, np.ceil(25 * 0.4), np.ceil(25 * 2.6)])
    one = at_least_one_min_fill(w, p=4, n_target=100)
    assert np.array_equal(one, [0, 0, 1, 1])


def test_solve_binning_at_least_one_and_callable_policies():
    sampler = UniformBoxSampler(BoxScaler([0.0], [1.0]))
    sol = solve_binning(
        unit_identity_model, sampler, UniformTarget(0.0, 1.0), ("grid", 12),
        n_target=300, seed=5, min_fill="at_least_one",
    )
    kept = sol.cell_weights.weights > 0
    assert np.all(sol.counts[kept] >= 1)
    sol2 = solve_binning(
        unit_identity_model, sampler, UniformTarget(0.0, 1.0), ("grid", 6),
        n_target=200, seed=6,
        min_fill=lambda w, p, n_target: np.full(p, 2, dtype=np.int64),
    )
    assert np.all(sol2.counts >= 2)


def test_solve_binning_data_box_override():
    rng = np.random.default_rng(67)
    lam = rng.uniform(size=(500, 1))
    box = BoxScaler([-0.02], [1.02])  # known support instead of the fitted hull
    sol = solve_binning(
        None, None, UniformTarget(0.0, 1.0), ("grid", 8), n_target=500, seed=0,
        initial_samples=lam, predicted_samples=lam, data_box=box,
    )
    assert np.array_equal(sol.box.lower, box.lower)
    assert abs(sol.sample_weights.weights.sum() - 1.0) < 1e-12
