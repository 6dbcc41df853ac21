import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize

from concentra.errors import DomainError
from concentra.minnorm import min_norm_point


def slsqp_min_norm(P):
    k = len(P)
    res = minimize(lambda w: float((w @ P) @ (w @ P)), np.full(k, 1 / k), jac=lambda w: 2 * P @ (w @ P),
                   bounds=[(0, 1)] * k, constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    return res.fun


@pytest.mark.parametrize("seed", range(40))
def test_against_slsqp(seed):
    rng = np.random.default_rng(seed)
    k, n = rng.integers(1, 12), rng.integers(1, 8)
    P = rng.normal(size=(k, n)) + rng.normal(size=n)
    res = min_norm_point(P)
    assert res.norm**2 <= slsqp_min_norm(P) + 1e-9
    assert res.gap >= -1e-9
    np.testing.assert_allclose(res.weights @ P, res.point, atol=1e-9)


@given(arrays(float, st.tuples(st.integers(1, 10), st.integers(1, 6)), elements=st.floats(-10, 10)))
def test_certificate_and_weights(P):
    res = min_norm_point(P)
    assert res.gap >= -1e-9 * max(1.0, float(np.max(np.abs(P))) ** 2)
    assert np.all(res.weights >= -1e-12)
    assert res.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(res.weights @ P, res.point, atol=1e-8)


def test_simple_instances():
    res = min_norm_point([[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(res.point, [0.5, 0.5], atol=1e-12)
    assert min_norm_point([[2.0, 2.0]]).norm == pytest.approx(np.sqrt(8))
    assert min_norm_point([[1.0, 1.0], [-1.0, -1.0]]).norm == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        min_norm_point(np.zeros((0, 2)))
