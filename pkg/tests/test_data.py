import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import hermite_e

from promkit.data import (
    ObservableLift,
    ParameterPoint,
    SnapshotSet,
    hermite_he,
    lift_observables,
    unlift_observables,
)
from promkit.errors import ConfigError

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_parameter_point_rejects_empty_and_nonfinite():
    with pytest.raises(ConfigError):
        ParameterPoint([])
    with pytest.raises(ConfigError):
        ParameterPoint([1.0, np.nan])
    assert ParameterPoint(3).values == (3.0,)
    assert ParameterPoint([1, 2]).dim == 2


def test_parameter_point_is_hashable_by_value():
    assert len({ParameterPoint(1.0), ParameterPoint([1.0]), ParameterPoint(2.0)}) == 2


def test_snapshot_set_validation():
    p = ParameterPoint(1.0)
    with pytest.raises(ConfigError):
        SnapshotSet(np.ones((3, 1)), 0.0, 1.0, p)
    with pytest.raises(ConfigError):
        SnapshotSet(np.array([[1.0, np.inf]]), 0.0, 1.0, p)
    with pytest.raises(ConfigError):
        SnapshotSet(np.ones((2, 3)), 0.0, 0.0, p)
    s = SnapshotSet(np.arange(12.0).reshape(3, 4), 1.0, 0.5, p)
    assert s.qoi_dim == 3 and s.n_snap == 3
    np.testing.assert_allclose(s.times, [1.0, 1.5, 2.0, 2.5])
    assert s.head(2).data.shape == (3, 3)


def test_snapshot_data_is_read_only():
    s = SnapshotSet(np.ones((2, 3)), 0.0, 1.0, ParameterPoint(0.0))
    with pytest.raises(ValueError):
        s.data[0, 0] = 5.0


def test_affine_lift_example():
    lift = ObservableLift.affine(2)
    np.testing.assert_array_equal(lift.lift(np.array([2.0, 3.0])), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(lift.unlift(np.array([1.0, 2.0, 3.0])), [2.0, 3.0])
    assert lift.observable_dim == 3


def test_hermite_at_zero():
    lift = ObservableLift.hermite(4)
    np.testing.assert_array_equal(lift.lift(np.array([0.0])), [1.0, 0.0, -1.0, 0.0])


def test_hermite_unlift_reads_first_degree_slot():
    lift = ObservableLift.hermite(4, mean=5.0, scale=2.0)
    assert lift.unlift(np.array([1.0, 1.5, 0.3, -2.0]))[0] == pytest.approx(8.0)


def test_stack_lift_example():
    lift = ObservableLift.stack([2, 2])
    q = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(lift.lift(q), [1.0, 1.0, 2.0, 3.0, 4.0])
    a, b = lift.split(q)
    np.testing.assert_array_equal(a, [1.0, 2.0])
    np.testing.assert_array_equal(b, [3.0, 4.0])
    assert lift.observable_dim == 5


def test_lift_errors():
    with pytest.raises(ConfigError):
        ObservableLift.affine(2).lift(np.ones(3))
    with pytest.raises(ConfigError):
        ObservableLift.affine(1).lift(np.array([np.nan]))
    with pytest.raises(ConfigError):
        ObservableLift("hermite", 2, order=3)
    with pytest.raises(ConfigError):
        ObservableLift.hermite(1).unlift(np.ones(1))
    with pytest.raises(ConfigError):
        ObservableLift.hermite(3, scale=0.0)
    with pytest.raises(ConfigError):
        ObservableLift.stack([2, 0])


def test_hermite_matches_numpy_hermite_e(rng):
    x = rng.uniform(-4, 4, 200)
    H = hermite_he(x, 9)
    for n in range(9):
        coef = np.zeros(n + 1)
        coef[n] = 1.0
        np.testing.assert_allclose(H[n], hermite_e.hermeval(x, coef), rtol=1e-12, atol=1e-12)


def test_hermite_recurrence(rng):
    x = rng.uniform(-3, 3, 200)
    H = hermite_he(x, 8)
    for n in range(1, 7):
        np.testing.assert_allclose(H[n + 1], x * H[n] - n * H[n - 1], atol=1e-12)


def test_hermite_from_data_uses_pooled_moments():
    series = np.array([1.0, 2.0, 3.0, 4.0])
    lift = ObservableLift.hermite_from_data(3, series)
    assert lift.mean == pytest.approx(2.5)
    assert lift.scale == pytest.approx(np.std(series))


@given(st.lists(finite, min_size=3, max_size=3), st.sampled_from(["identity", "affine", "stack"]))
def test_roundtrip_vector_lifts(q, kind):
    q = np.array(q)
    lift = {"identity": ObservableLift.identity(3), "affine": ObservableLift.affine(3), "stack": ObservableLift.stack([1, 2])}[kind]
    back = unlift_observables(lift, lift_observables(lift, q))
    np.testing.assert_allclose(back, q, rtol=1e-14, atol=0)


@given(finite, st.floats(-10, 10), st.floats(0.1, 100), st.integers(2, 9))
def test_roundtrip_hermite(q, mu, sigma, m):
    lift = ObservableLift.hermite(m, mu, sigma)
    back = lift.unlift(lift.lift(np.array([q])))
    assert back[0] == pytest.approx(q, rel=1e-13, abs=1e-13 * (abs(mu) + sigma))


@given(st.lists(finite, min_size=4, max_size=4))
def test_affine_leading_entry_is_exactly_one(q):
    assert ObservableLift.affine(4).lift(np.array(q))[0] == 1.0


def test_lift_applies_columnwise(rng):
    Q = rng.standard_normal((3, 5))
    Y = ObservableLift.affine(3).lift(Q)
    assert Y.shape == (4, 5)
    np.testing.assert_array_equal(Y[0], 1.0)
    y = ObservableLift.hermite(4).lift(Q[:1])
    assert y.shape == (4, 5)


def test_drift_reports_leading_deviation():
    lift = ObservableLift.affine(1)
    assert lift.drift(np.array([[1.0, 1.2, 0.7], [0, 0, 0]])) == pytest.approx(0.3)
    assert ObservableLift.identity(2).drift(np.zeros((2, 2))) == 0.0


@pytest.mark.parametrize(
    "lift",
    [ObservableLift.identity(3), ObservableLift.affine(2), ObservableLift.stack([1, 3]), ObservableLift.hermite(5, 1.5, 0.25)],
)
def test_lift_dict_roundtrip(lift):
    assert ObservableLift.from_dict(lift.to_dict()) == lift
