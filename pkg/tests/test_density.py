import numpy as np
import pytest

from dcinv.core import BoxScaler, SampleSet
from dcinv.density import (
    KdeModel,
    density_ratio,
    density_ratio_many,
    diagnostic,
    kde_fit,
    rejection_sample,
    solve_density,
    update_probability,
)


def test_kde_fixed_bandwidth_hand_value():
    # two unit kernels at -1 and 1 evaluated at 0: phi(1) = e^{-1/2}/sqrt(2 pi)
    model = kde_fit(np.array([[-1.0], [1.0]]), rule=1.0)
    val = model.pdf(np.array([[0.0]]))[0]
    assert val == pytest.approx(np.exp(-0.5) / np.sqrt(2 * np.pi), abs=1e-14)


def test_kde_far_point_underflows():
    model = kde_fit(np.array([[-1.0], [1.0]]), rule=1.0)
    val = model.pdf(np.array([[60.0]]))[0]
    assert val < 1e-300


def test_kde_single_point_rejected():
    with pytest.raises(ValueError):
        kde_fit(np.array([[0.5]]))


def test_kde_scott_bandwidth_matrix():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(500, 1))
    model = kde_fit(x, rule="scott")
    expected = np.var(x, ddof=1) * 500 ** (-2.0 / 5.0)
    assert model.bandwidth_matrix[0, 0] == pytest.approx(expected)
    silver = kde_fit(x, rule="silverman")
    expected_s = np.var(x, ddof=1) * (500 * 3.0 / 4.0) ** (-2.0 / 5.0)
    assert silver.bandwidth_matrix[0, 0] == pytest.approx(expected_s)


def test_kde_integrates_to_one_1d():
    rng = np.random.default_rng(5)
    model = kde_fit(rng.normal(size=(200, 1)), rule="scott")
    grid = np.linspace(-8, 8, 4001)[:, None]
    mass = np.trapezoid(model.pdf(grid), grid[:, 0])
    assert mass == pytest.approx(1.0, abs=1e-3)


def test_kde_singular_covariance_fallback():
    pts = np.column_stack([np.linspace(0, 1, 50), np.linspace(0, 1, 50)])
    with pytest.warns(UserWarning, match="singular"):
        model = kde_fit(pts, rule="scott")
    np.linalg.cholesky(model.bandwidth_matrix)


def test_kde_binned_matches_exact():
    rng = np.random.default_rng(9)
    x = rng.normal(0.5, 0.1, size=(5000, 1))
    model = kde_fit(x, rule="scott")
    q = rng.uniform(0.2, 0.8, size=(200, 1))
    exact = model.pdf(q)
    binned = model.pdf(q, method="binned", grid=4096)
    assert np.max(np.abs(binned - exact) / exact.max()) < 5e-4


def test_density_ratio_identical_models_is_one():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(100, 1))
    model = kde_fit(x)
    q = rng.uniform(-1, 1, size=(50, 1))
    ratios, flags = density_ratio_many(model, model, q)
    assert np.allclose(ratios, 1.0, atol=1e-12)
    assert not flags.any()


def test_density_ratio_uniform_consistency():
    rng = np.random.default_rng(13)
    a = kde_fit(rng.uniform(size=(20_000, 1)))
    b = kde_fit(rng.uniform(size=(20_000, 1)))
    assert density_ratio(a, b, np.array([0.5])) == pytest.approx(1.0, abs=0.1)


def test_density_ratio_violation_flag():
    obs = kde_fit(np.array([[100.0], [100.1]]), rule=0.01)
    pred = kde_fit(np.array([[0.0], [0.1]]), rule=0.01)
    ratios, flags = density_ratio_many(obs, pred, np.array([[100.0]]))
    assert flags[0] and np.isinf(ratios[0])


def test_diagnostic_values():
    assert diagnostic([1.0, 1.0, 1.0]) == 1.0
    with pytest.raises(ValueError):
        diagnostic([])


def test_rejection_all_equal_accepts_everything():
    samples = SampleSet(np.arange(10.0))
    accepted = rejection_sample(samples, np.full(10, 3.3), seed=0)
    assert accepted.n == 10


def test_rejection_zero_ratio_never_accepted():
    samples = SampleSet(np.array([0.0, 1.0]))
    for seed in range(20):
        accepted = rejection_sample(samples, np.array([1.0, 0.0]), seed=seed)
        assert np.all(accepted.points[:, 0] == 0.0)


def test_rejection_acceptance_fraction_binomial():
    rng = np.random.default_rng(17)
    n = 5000
    r = rng.uniform(0.0, 2.0, size=n)
    p_acc = np.mean(r / r.max())
    fractions = [
        rejection_sample(SampleSet(np.arange(float(n))), r, seed=s).n / n
        for s in range(10)
    ]
    sd = np.sqrt(p_acc * (1 - p_acc) / n)
    assert np.all(np.abs(np.array(fractions) - p_acc) < 3 * sd + 3 * sd)


def test_rejection_all_zero_errors():
    with pytest.raises(ValueError):
        rejection_sample(SampleSet(np.array([0.0])), np.array([0.0]), seed=0)


def test_update_probability_whole_and_empty_region():
    rng = np.random.default_rng(19)
    pts = rng.uniform(size=(500, 2))
    r = rng.uniform(0.5, 1.5, size=500)
    whole = update_probability(BoxScaler([0.0, 0.0], [1.0, 1.0]), pts, r)
    assert whole.raw == pytest.approx(np.mean(r))
    assert whole.self_normalized == pytest.approx(1.0)
    nothing = update_probability(BoxScaler([5.0, 5.0], [6.0, 6.0]), pts, r)
    assert nothing.raw == 0.0 and nothing.self_normalized == 0.0


def test_ratio_constant_on_contours():
    # the ratio is a function of q only: identical data values, identical ratio
    rng = np.random.default_rng(23)
    obs = kde_fit(rng.normal(0.5, 0.2, size=(300, 1)))
    pred = kde_fit(rng.uniform(size=(300, 1)))
    q = np.array([[0.37]])
    assert density_ratio(obs, pred, q) == density_ratio(obs, pred, q.copy())


def test_solve_density_identical_distributions():
    rng = np.random.default_rng(29)
    n = 2000
    initial = SampleSet(rng.uniform(size=(n, 2)))
    predicted = SampleSet(rng.normal(0.5, 0.1, size=(n, 1)))
    observed = SampleSet(rng.normal(0.5, 0.1, size=(n, 1)))
    sol = solve_density(initial, predicted, observed)
    assert abs(sol.diagnostic - 1.0) < 3.0 / np.sqrt(n)
    assert sol.n_violations == 0
    weights = sol.update_weights()
    assert weights.sum() == pytest.approx(1.0)


def test_kde_model_validation():
    with pytest.raises(ValueError):
        KdeModel(SampleSet([0.0, 1.0]), np.array([[-1.0]]), rule="fixed")
    with pytest.raises(ValueError):
        kde_fit(np.array([[0.0], [1.0]]), rule=-0.5)


def test_pdf_method_validation():
    rng = np.random.default_rng(31)
    model2d = kde_fit(rng.uniform(size=(50, 2)))
    with pytest.raises(ValueError, match="1-D only"):
        model2d.pdf(np.zeros((1, 2)), method="binned")
    model1d = kde_fit(rng.uniform(size=(50, 1)))
    with pytest.raises(ValueError, match="unknown"):
        model1d.pdf(np.zeros((1, 1)), method="fft")
    with pytest.raises(ValueError, match="dim"):
        model1d.pdf(np.zeros((1, 2)))


def test_update_probability_accepts_plain_bounds():
    rng = np.random.default_rng(37)
    pts = rng.uniform(size=(200, 1))
    r = np.ones(200)
    est = update_probability([[0.0, 0.5]], pts, r)
    assert est.self_normalized == pytest.approx(np.mean(pts[:, 0] <= 0.5))


def test_rejection_pushforward_improves_on_unweighted():
    # accepted samples pushed through the model give an EDF closer (sup-norm)
    # to the observed EDF than the raw predicted EDF
    from dcinv.core import WeightedEdf, fit_box
    from dcinv.edf import sup_distance, wedf_eval_many
    from dcinv.models import HeatRod, UniformBoxSampler, heat_rod_observed

    model = HeatRod()
    rng = np.random.default_rng(71)
    initial = UniformBoxSampler(model.box).sample(2000, rng)
    predicted = SampleSet(model.qoi(initial.points)[:, None])
    observed = heat_rod_observed().sample(10_000, rng)
    sol = solve_density(initial, predicted, observed)

    accepted = rejection_sample(initial, sol.r_values, seed=5)
    accepted_pf = SampleSet(model.qoi(accepted.points)[:, None])
    box = fit_box(np.vstack([predicted.points, observed.points]), padding=0.01)
    obs_edf = lambda pts: wedf_eval_many(WeightedEdf.plain(observed), pts)
    err_accepted = sup_distance(WeightedEdf.plain(accepted_pf), obs_edf, box, 2048)
    err_plain = sup_distance(WeightedEdf.plain(predicted), obs_edf, box, 2048)
    assert err_accepted < err_plain
