import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from concentra.bounds import ExpTail
from concentra.errors import DomainError
from concentra.symmetrization import (
    EmpiricalSample,
    hinge_dominates,
    hinge_moment,
    normalized_statistic,
    sqrt_variational,
    tail_certificate,
    transfer_tail,
)

finite = st.floats(-100, 100, allow_nan=False)
samples = st.lists(finite, min_size=1, max_size=12).map(EmpiricalSample)


def test_hinge_examples():
    s = EmpiricalSample([0.0, 2.0])
    assert hinge_moment(s, 1.0) == 0.5
    assert hinge_moment(s, 2.0) == 0.0
    assert hinge_moment(s, -1e6) == pytest.approx(s.mean() + 1e6)
    with pytest.raises(DomainError):
        hinge_moment(EmpiricalSample([]), 0.0)


@given(samples, finite, st.floats(0.01, 10))
def test_hinge_nonincreasing(s, a, da):
    assert hinge_moment(s, a + da) <= hinge_moment(s, a) + 1e-12


@given(samples, finite, finite, st.floats(0, 1))
def test_hinge_convex(s, a, b, lam):
    mid = lam * a + (1 - lam) * b
    assert hinge_moment(s, mid) <= lam * hinge_moment(s, a) + (1 - lam) * hinge_moment(s, b) + 1e-9


@given(samples)
def test_hinge_piecewise_linear_between_atoms(s):
    # slope on each gap is -P(X > a), constant between consecutive atoms
    atoms = np.unique(s.values)
    for lo, hi in zip(atoms, atoms[1:]):
        if hi - lo < 1e-3:
            continue
        a1, a2 = lo + (hi - lo) / 3, lo + 2 * (hi - lo) / 3
        slope = (hinge_moment(s, a2) - hinge_moment(s, a1)) / (a2 - a1)
        assert slope == pytest.approx(-float(s.probs[s.values > lo].sum()), abs=1e-6)


def test_dominates_examples():
    nu = EmpiricalSample([0.5, 3.0, 1.0])
    assert hinge_dominates(nu, nu) == (True, 0.0)
    assert hinge_dominates(EmpiricalSample([0.0]), nu)[0]
    holds, gap = hinge_dominates(EmpiricalSample([-1.0, 1.0]), EmpiricalSample([0.0, 0.0]))
    assert not holds and gap == pytest.approx(0.5)
    with pytest.raises(DomainError):
        hinge_dominates(nu, nu, a_grid=[])


@given(samples, samples)
def test_breakpoint_grid_is_exact(xi, nu):
    holds, gap = hinge_dominates(xi, nu)
    fine = np.linspace(-110, 110, 4001)
    _, fine_gap = hinge_dominates(xi, nu, a_grid=fine)
    assert fine_gap <= gap + 1e-9


def test_transfer_tail():
    assert transfer_tail(ExpTail(1.0, 1.0)) == ExpTail(math.e, 1.0)
    assert transfer_tail(ExpTail(2.0, 0.5)) == ExpTail(2 * math.e, 0.5)
    with pytest.raises(DomainError):
        transfer_tail(ExpTail(0.5, 1.0))
    cert = transfer_tail(ExpTail(3.0, 0.7))
    assert cert((1 + math.log(3.0)) / 0.7) == pytest.approx(1.0)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.lists(st.floats(-5, 5), min_size=1, max_size=8),
       st.floats(0.2, 3))
def test_lemma_transfer_holds_on_dominated_pairs(a, b, rate):
    # build xi dominated by nu: xi = conditional-mean contraction of nu
    nu = EmpiricalSample(a + b)
    xi = EmpiricalSample([np.mean(a)] * len(a) + [np.mean(b)] * len(b))
    assert hinge_dominates(xi, nu)[0]
    cert = transfer_tail(tail_certificate(nu, rate))
    for t in np.linspace(0, 6, 25):
        assert xi.tail(t) <= cert(t) + 1e-12


def test_tail_certificate_is_tight():
    nu = EmpiricalSample([0.0, 1.0, 2.0])
    cert = tail_certificate(nu, 1.0)
    assert cert.gamma_factor == pytest.approx(max(1.0, math.e * 2 / 3, math.e**2 / 3))
    for t in np.linspace(0, 3, 31):
        assert nu.tail(t) <= cert(t) + 1e-12


def test_sqrt_variational_examples():
    assert sqrt_variational(4, 9) == (6.0, 0.75)
    assert sqrt_variational(3, 0)[0] == 0.0
    assert sqrt_variational(0, 0)[0] == 0.0
    with pytest.raises(DomainError):
        sqrt_variational(-1, 1)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_sqrt_variational_grid_oracle(a, b):
    value, delta = sqrt_variational(a, b)
    grid = delta * np.exp(np.linspace(-3, 3, 200001))
    assert np.min(grid * a + b / (4 * grid)) == pytest.approx(value, abs=1e-9 * max(1.0, value))


def test_normalized_statistic_examples():
    assert normalized_statistic(1.0, 2.0, 1.0) == 0.0
    assert normalized_statistic(3.0, 1.0, 1.0) == 4.0
    with pytest.raises(DomainError):
        normalized_statistic(1.0, 0.0, 0.0)


@given(finite, finite, st.floats(1e-3, 100))
def test_normalized_statistic_matches_grid_sup(x1, x2, x3):
    c = x1 - x2
    stat = normalized_statistic(x1, x2, x3)
    if c > 0:
        grid = (c / (2 * x3)) * np.linspace(0.5, 1.5, 100001)
        assert np.max(4 * grid * (c - grid * x3)) == pytest.approx(stat, rel=1e-9)
    else:
        assert stat == 0.0
