import numpy as np
import pytest

from dcinv.core import (
    BoxScaler,
    Normalization,
    SampleSet,
    WeightedEdf,
    WeightVector,
    fit_box,
    scale_to_unit,
)


def test_fit_box_tight():
    box = fit_box(np.array([[0.2], [0.8]]), padding=0.0)
    assert box.lower[0] == 0.2 and box.upper[0] == 0.8


def test_fit_box_padding():
    # width 0.6, 10% each side
    box = fit_box(np.array([[0.2], [0.8]]), padding=0.1)
    assert np.allclose([box.lower[0], box.upper[0]], [0.14, 0.86])


def test_fit_box_2d_componentwise():
    box = fit_box(np.array([[0.0, 1.0], [1.0, 0.0]]), padding=0.0)
    assert np.allclose(box.lower, [0.0, 0.0])
    assert np.allclose(box.upper, [1.0, 1.0])


def test_fit_box_empty_rejected():
    with pytest.raises(ValueError):
        fit_box(np.empty((0, 1)))


def test_fit_box_zero_width_dimension_widened():
    with pytest.warns(UserWarning, match="zero-width"):
        box = fit_box(np.array([[1.0, 0.2], [1.0, 0.8]]))
    assert box.upper[0] - box.lower[0] == pytest.approx(1e-9)
    assert box.upper[1] == 0.8


def test_scale_identity_box():
    box = BoxScaler([0.0], [1.0])
    assert box.scale(np.array([[0.5]]))[0, 0] == 0.5


def test_scale_midpoint():
    box = BoxScaler([0.4], [0.6])
    assert box.scale(np.array([[0.5]]))[0, 0] == pytest.approx(0.5)


def test_scale_2d_parameter_box():
    box = BoxScaler([1.9, 0.5], [2.1, 1.5])
    out = box.scale(np.array([[2.0, 1.0]]))
    assert np.allclose(out, [[0.5, 0.5]])


def test_scale_unscale_roundtrip_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        d = rng.integers(1, 4)
        lo = rng.normal(size=d)
        hi = lo + rng.uniform(0.1, 5.0, size=d)
        box = BoxScaler(lo, hi)
        pts = rng.uniform(lo, hi, size=(20, d))
        back = box.unscale(box.scale(pts))
        assert np.max(np.abs(back - pts)) < 1e-12


def test_scale_to_unit_maps_inside():
    samples = SampleSet(np.array([[1.95, 0.7], [2.05, 1.3]]))
    box = fit_box(samples, padding=0.05)
    scaled = scale_to_unit(samples, box)
    assert np.all(scaled.points >= 0.0) and np.all(scaled.points <= 1.0)


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        BoxScaler([0.0, 1.0], [1.0, 1.0])


def test_sample_set_validation():
    with pytest.raises(ValueError):
        SampleSet(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        SampleSet(np.zeros((2, 2, 2)))
    ss = SampleSet([1.0, 2.0, 3.0])
    assert ss.dim == 1 and ss.n == 3


def test_sample_set_immutable_and_ordered():
    pts = np.array([[3.0], [1.0], [2.0]])
    ss = SampleSet(pts)
    with pytest.raises(ValueError):
        ss.points[0, 0] = 9.0
    assert ss.points[0, 0] == 3.0  # order preserved, index stable
    assert np.array_equal(ss.prefix(2).points, pts[:2])


def test_weight_vector_normalization():
    WeightVector(np.array([0.5, 1.5]))  # mean one
    WeightVector(np.array([0.25, 0.75]), Normalization.SUM_ONE)
    with pytest.raises(ValueError):
        WeightVector(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        WeightVector(np.array([-0.1, 2.1]))


def test_weighted_edf_shape_checks():
    samples = SampleSet([0.2, 0.6])
    with pytest.raises(ValueError):
        WeightedEdf(samples, WeightVector(np.ones(3)))
    wedf = WeightedEdf.plain(samples)
    assert wedf.eval([1.0]) == 1.0
