import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helios.metrics import score


def test_perfect_fit():
    s = score([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])
    assert s.r_squared == 1.0 and s.rmse_abs == 0.0 and s.rmse_pct == 0.0


def test_constant_mean_prediction_has_zero_r2():
    obs = np.array([1.0, 4.0, 7.0, 10.0])
    assert score(obs, np.full(4, obs.mean())).r_squared == pytest.approx(0.0, abs=1e-15)


def test_hand_computed_example():
    s = score([0, 10, 20], [0, 10, 26])
    assert s.rmse_abs == pytest.approx(math.sqrt(12.0), rel=1e-15)
    assert round(s.rmse_abs, 3) == 3.464
    assert s.r_squared == pytest.approx(0.82, rel=1e-15)
    assert s.rmse_pct == pytest.approx(100 * math.sqrt(12.0) / 20, rel=1e-15)


def test_degenerate_inputs():
    s = score([3.0, 3.0], [3.0, 4.0])
    assert math.isnan(s.r_squared)
    assert math.isnan(score([0.0, 0.0], [0.0, 1.0]).rmse_pct)
    with pytest.raises(ValueError):
        score([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        score([], [])


pairs = st.lists(st.tuples(st.floats(0, 1000), st.floats(0, 1000)), min_size=2, max_size=30)


@given(pairs, st.randoms())
def test_r2_invariant_to_joint_permutation(data, rnd):
    obs, pred = map(np.array, zip(*data))
    perm = list(range(len(data)))
    rnd.shuffle(perm)
    a, b = score(obs, pred).r_squared, score(obs[perm], pred[perm]).r_squared
    assert (math.isnan(a) and math.isnan(b)) or a == pytest.approx(b, rel=1e-9, abs=1e-9)


@given(pairs)
def test_rmse_symmetric(data):
    obs, pred = map(np.array, zip(*data))
    assert score(obs, pred).rmse_abs == pytest.approx(score(pred, obs).rmse_abs, rel=1e-12)


@given(pairs, st.floats(-500, 500))
def test_rmse_shift_invariant(data, c):
    obs, pred = map(np.array, zip(*data))
    assert score(obs + c, pred + c).rmse_abs == pytest.approx(score(obs, pred).rmse_abs, rel=1e-9, abs=1e-9)
