import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ctxbandit.mollifier import (eta, eta0, eta0_prime, eta_bridge_mass, eta_second_derivative_bound,
                                 eta_total)
from helpers import central_gradient


def test_bump_examples():
    assert eta0(0.0) == 1.0
    assert eta0(0.25) == 1.0
    assert eta0(2.0) == 0.0
    assert eta0(1.0) == 0.0
    # strictly inside (0, 1) wherever double precision can tell
    mid = eta0(np.linspace(0.3, 0.95, 200))
    assert np.all((mid > 0) & (mid < 1))
    assert np.all(np.diff(mid) < 0)


@given(st.floats(-3, 3))
def test_bump_even(x):
    assert eta0(x) == eta0(-x)


def test_integral_examples():
    assert eta(-1.0) == 0.0
    assert eta(-5.0) == 0.0
    grid = np.linspace(-2, 2, 1000)
    assert np.all(np.diff(eta(grid)) >= 0)


def test_integral_matches_quadrature():
    xs = np.linspace(-1.2, 1.2, 97)
    ref = np.array([integrate.quad(eta0, -1.0, x, epsabs=1e-13, epsrel=1e-13, limit=200)[0] if x > -1 else 0.0
                    for x in xs])
    assert np.max(np.abs(eta(xs) - ref)) <= 1e-10


def test_constants():
    # by the symmetry s <-> 1 - s of the bridge, half of the bridge interval carries mass
    assert eta_bridge_mass() == pytest.approx(0.375, abs=1e-12)
    assert eta(0.0) == pytest.approx(0.625, abs=1e-12)
    assert eta_total() == pytest.approx(1.25, abs=1e-12)
    assert eta(1.0) == eta_total() == eta(7.0)
    grid = np.linspace(-1, 1, 20001)
    assert eta_second_derivative_bound() >= np.max(np.abs(eta0_prime(grid)))
    assert eta_second_derivative_bound() == pytest.approx(8 / 3, rel=1e-6)


def test_derivatives():
    xs = np.linspace(-1.1, 1.1, 301)
    num = np.array([central_gradient(lambda u: eta0(u[0]), [x], h=1e-6)[0] for x in xs])
    assert np.max(np.abs(eta0_prime(xs) - num)) <= 1e-6
    num1 = np.array([central_gradient(lambda u: eta(u[0]), [x], h=1e-5)[0] for x in xs])
    assert np.max(np.abs(eta0(xs) - num1)) <= 1e-8


def test_vectorized_shapes():
    X = np.zeros((3, 4))
    assert eta(X).shape == (3, 4)
    assert eta0(X).shape == (3, 4)
    assert isinstance(eta(0.3), float)
