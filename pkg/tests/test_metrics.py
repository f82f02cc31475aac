import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from promkit.errors import ConfigError
from promkit.metrics import relative_l2_series, total_relative_l2

mats = arrays(np.float64, (3, 6), elements=st.floats(-100, 100))


def test_identical_trajectories_have_zero_error(rng):
    Q = rng.standard_normal((4, 7))
    assert total_relative_l2(Q, Q) == 0.0
    assert np.all(relative_l2_series(Q, Q)[0] == 0.0)


def test_unit_example():
    ref = np.array([[1.0, 1.0], [0.0, 0.0]])
    pred = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert total_relative_l2(pred, ref) == pytest.approx(np.sqrt(2.0))


def test_single_step_series_example():
    e, _ = relative_l2_series(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))
    assert e[0] == pytest.approx(np.sqrt(2.0), rel=1e-15)


@given(mats, mats)
def test_series_matches_elementwise_recomputation(P, R):
    e, absolute = relative_l2_series(P, R)
    for k in range(P.shape[1]):
        num = np.sqrt(sum((P[i, k] - R[i, k]) ** 2 for i in range(P.shape[0])))
        den = np.sqrt(sum(R[i, k] ** 2 for i in range(P.shape[0])))
        expected = num if den == 0 else num / den
        assert absolute[k] == (den == 0)
        assert e[k] == pytest.approx(expected, rel=1e-14, abs=1e-300)


def test_doubled_prediction_has_unit_error(rng):
    R = rng.standard_normal((5, 9))
    assert total_relative_l2(2 * R, R) == pytest.approx(1.0, rel=1e-14)


@given(mats, mats)
def test_matches_direct_formula(P, R):
    if np.sum(R[:, 1:] ** 2) == 0:
        with pytest.raises(ConfigError):
            total_relative_l2(P, R)
        return
    d = P - R
    num = sum(np.sum(d[:, k] ** 2) for k in range(1, 6))
    den = sum(np.sum(R[:, k] ** 2) for k in range(1, 6))
    assert total_relative_l2(P, R) == pytest.approx(np.sqrt(num / den), rel=1e-12, abs=1e-300)


@given(mats, mats)
def test_total_is_reference_weighted_mean_of_series(P, R):
    ref_norm = np.linalg.norm(R, axis=0)[1:]
    if np.any(ref_norm == 0):
        return
    e, _ = relative_l2_series(P, R)
    weighted = np.sqrt(np.sum((e[1:] * ref_norm) ** 2) / np.sum(ref_norm**2))
    assert weighted == pytest.approx(total_relative_l2(P, R), rel=1e-13, abs=1e-300)


def test_initial_column_excluded_by_default():
    R = np.ones((2, 3))
    P = R.copy()
    P[:, 0] = 5.0
    assert total_relative_l2(P, R) == 0.0
    assert total_relative_l2(P, R, include_initial=True) > 0.0


def test_zero_reference_column_reports_absolute():
    R = np.array([[0.0, 1.0]])
    P = np.array([[0.5, 1.0]])
    e, absolute = relative_l2_series(P, R)
    assert absolute.tolist() == [True, False]
    assert e.tolist() == [0.5, 0.0]


def test_errors():
    with pytest.raises(ConfigError):
        total_relative_l2(np.ones((2, 3)), np.ones((2, 4)))
    with pytest.raises(ConfigError):
        total_relative_l2(np.ones((2, 3)), np.zeros((2, 3)))
