import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize, minimize_scalar

from ctxbandit.conversion import Partition
from ctxbandit.environments import (ContextualQuadratic, FixedSequence, IIDUniform, LowerBoundFamily, PKContexts,
                                    admissible_radii, certify_constants, dist_to_cell_boundary, loss_eval,
                                    loss_min_oracle, lower_bound_K, make_context_process, make_loss,
                                    sample_context)
from ctxbandit.exceptions import CertificationFailed, ExhaustedSequence, NotInCell
from ctxbandit.geometry import Ball, Polytope
from ctxbandit.mollifier import eta
from helpers import central_gradient, central_jacobian, fd_relative_error


def quad_model(**kw):
    kw.setdefault("A", [[0.5], [0.0]])
    kw.setdefault("v", [-0.25, 0.1])
    return ContextualQuadratic(Ball.unit(2), **kw)


def test_dist_to_cell_boundary_examples():
    part = Partition(2, 3)
    assert dist_to_cell_boundary(part, 0, [1 / 6, 1 / 6]) == pytest.approx(1 / 6)
    assert dist_to_cell_boundary(part, 0, [0.1, 1 / 6]) == pytest.approx(0.1)
    with pytest.raises(NotInCell):
        dist_to_cell_boundary(part, 0, [0.5, 0.1])


@given(st.integers(1, 3), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_dist_bounded_by_half_edge(p, K, seed):
    part = Partition(p, K)
    c = np.random.default_rng(seed).random(p)
    assert 0.0 <= dist_to_cell_boundary(part, part.cell_of(c), c) <= 1 / (2 * K) + 1e-15


def test_quadratic_examples():
    q = quad_model(offset=0.3)
    c = np.array([0.4])
    m = q.target(c)
    np.testing.assert_allclose(m, [-0.05, 0.1])
    assert loss_eval(q, m, c) == pytest.approx(0.3)
    x, f = loss_min_oracle(q, c)
    np.testing.assert_allclose(x, m)
    assert f == pytest.approx(0.3)
    np.testing.assert_allclose(q.gradient([0.2, 0.2], c), [0.25, 0.1])
    np.testing.assert_allclose(q.hessian([0.2, 0.2], c), np.eye(2))


def test_quadratic_minimizer_on_boundary():
    q = ContextualQuadratic(Ball.unit(2), A=[[2.0], [1.0]], v=[0.5, 0.0], clip=None, L=20.0)
    c = np.array([0.9])
    m = q.target(c)
    assert np.linalg.norm(m) > 1
    x, f = loss_min_oracle(q, c)
    np.testing.assert_allclose(x, m / np.linalg.norm(m), atol=1e-15)
    # fine line search over the circle
    res = minimize_scalar(lambda th: q.value([math.cos(th), math.sin(th)], c), bounds=(-math.pi, math.pi),
                          method="bounded", options={"xatol": 1e-12})
    assert f == pytest.approx(res.fun, abs=1e-10)


def test_quadratic_clip_keeps_targets_inside():
    q = ContextualQuadratic(Ball.unit(2), A=[[5.0], [0.0]], v=[0.0, 0.0], L=20.0)
    assert np.linalg.norm(q.target([1.0])) == pytest.approx(0.9)


def test_quadratic_holder_certified_at_construction():
    with pytest.raises(CertificationFailed):
        quad_model(A=[[5.0], [0.0]], clip=None, L=1.0)
    q = quad_model(A=[[1.0], [0.0]], v=[0.0, 0.0], gamma=0.5, L=2.0)
    assert certify_constants(q, 2000, np.random.default_rng(0)).holder_ratio <= 2.0


def test_quadratic_on_polytope():
    body = Polytope.box([0, 0], [1, 1])
    q = ContextualQuadratic(body, A=[[0.2], [0.0]], v=[0.5, 0.5], L=1.0)
    x, f = q.minimizer([0.5])
    np.testing.assert_allclose(x, [0.6, 0.5])
    certify_constants(q, 500, np.random.default_rng(1))


def test_lower_bound_value_at_origin():
    lb = LowerBoundFamily(d=3, p=2, K=3, T=256, alpha=1.0, L=1.0, gamma=1.0, omega_seed=3, tau_seed=4)
    c = np.array([0.4, 0.45])
    j = lb.partition.cell_of(c)
    dist = dist_to_cell_boundary(lb.partition, j, c)
    expected = lb.r1 * lb.L * eta(0.0) * lb.omega[j] * dist + lb.r2 * lb.h ** 2 * eta(0.0) * lb.tau.sum()
    assert lb.value(np.zeros(3), c) == pytest.approx(expected, abs=1e-15)


def test_lower_bound_constants():
    lb = LowerBoundFamily(d=2, p=1, K=4, T=4096)
    assert lb.delta == 1 / 8
    assert lb.h == min(2 ** -0.5, 4096 ** -0.25) == 0.125
    assert lb.omega.shape == (4,) and set(np.unique(lb.omega)) <= {-1.0, 1.0}
    assert lb.tau.shape == (1,)
    r1, r2 = admissible_radii(1.0, 1.0)
    assert r1 <= 1.0 / 2 and r2 <= 1.0 / 2
    assert lb.r1 == r1 and lb.r2 == r2


def test_lower_bound_plateau_beyond_support():
    lb = LowerBoundFamily(d=3, p=1, K=2, T=10 ** 4, gamma=1.0)
    c = np.array([0.3])
    x = np.array([0.9, 0.5, 0.6])  # all eta arguments >= 1
    S = lb.context_weight(c)
    expected = (float(x @ x) + lb.r1 * lb.L * S * eta(5.0)
                + lb.r2 * lb.h ** 2 * eta(5.0) * lb.tau.sum())
    assert lb.value(x, c) == pytest.approx(expected, abs=1e-15)


def test_lower_bound_admissibility_rejected():
    with pytest.raises(ValueError):
        LowerBoundFamily(2, 1, 2, 100, r1=1.0)
    with pytest.raises(ValueError):
        LowerBoundFamily(2, 1, 2, 100, r2=0.9)


def test_lower_bound_d1_example():
    lb = LowerBoundFamily(d=1, p=1, K=1, T=100, alpha=1.0, L=1.0, gamma=1.0, r1=0.1, omega=[1.0])
    c = np.array([0.5])
    assert dist_to_cell_boundary(lb.partition, 0, c) == 0.5
    x, valid = lb.closed_form_minimizer(c)
    assert valid
    assert x[0] == pytest.approx(-0.5 * math.sqrt(2) * 0.1 * 0.5, abs=1e-15)
    assert x[0] == pytest.approx(-0.0353553, abs=1e-7)
    assert abs(x[0]) * math.sqrt(2) == pytest.approx(0.05)
    res = minimize_scalar(lambda u: lb.value([u], c), bounds=(-1, 1), method="bounded", options={"xatol": 1e-12})
    assert x[0] == pytest.approx(res.x, abs=1e-6)


@pytest.mark.parametrize("gamma", [1.0, 0.5, 0.0])
def test_lower_bound_derivatives(gamma, rng):
    lb = LowerBoundFamily(d=3, p=2, K=3, T=500, gamma=gamma)
    for x in lb.body.sample_interior(30, rng, shrink=0.9):
        c = rng.random(2)
        assert fd_relative_error(lb.gradient(x, c), central_gradient(lambda u: lb.value(u, c), x)) <= 1e-6
        assert fd_relative_error(lb.hessian(x, c), central_jacobian(lambda u: lb.gradient(u, c), x)) <= 1e-6


def test_lower_bound_minimizer_matches_numerics(rng):
    lb = LowerBoundFamily(d=3, p=1, K=5, T=4096)
    for c in rng.random((100, 1)):
        x, f = loss_min_oracle(lb, c)
        res = minimize(lambda u: lb.value(u, c), np.zeros(3), jac=lambda u: lb.gradient(u, c), method="BFGS",
                       options={"gtol": 1e-12})
        np.testing.assert_allclose(x, res.x, atol=1e-6)
        assert f <= res.fun + 1e-12


def test_lower_bound_continuity_across_cells():
    lb = LowerBoundFamily(d=2, p=1, K=4, T=1024, gamma=1.0)
    x = np.array([0.1, -0.05])
    for edge in (0.25, 0.5, 0.75):
        left, right = lb.value(x, [edge - 1e-12]), lb.value(x, [edge + 1e-12])
        assert abs(left - right) <= 1e-11
        # the context term vanishes on the boundary itself
        assert lb.context_weight([edge]) == 0.0


def test_gamma0_jump_bounded():
    lb = LowerBoundFamily(d=2, p=1, K=8, T=1024, gamma=0.0)
    x = np.array([0.3, 0.2])
    for edge in np.arange(1, 8) / 8:
        assert abs(lb.value(x, [edge - 1e-9]) - lb.value(x, [edge + 1e-9])) <= lb.L


def test_lower_bound_certification(rng):
    for gamma in (1.0, 0.5, 0.0):
        lb = LowerBoundFamily(d=2, p=1, K=4, T=1024, gamma=gamma)
        rep = certify_constants(lb, 3000, rng)
        assert rep.hess_min >= 1.0 - 1e-9 and rep.hess_max <= 3.0 + 1e-9
        assert rep.holder_ratio <= 1.0 and rep.sup_abs <= lb.M
    bad = LowerBoundFamily(d=2, p=1, K=1, T=1024, r1=10.0, check=False)
    with pytest.raises(CertificationFailed) as info:
        certify_constants(bad, 10_000, rng)
    assert set(info.value.witness) == {"x", "c", "c_prime"}


def test_static_comparator_lower_bound(rng):
    lb = LowerBoundFamily(d=2, p=1, K=3, T=1024)
    C = rng.random((40, 1))
    z, total = lb.static_comparator(C)
    res = minimize(lambda u: sum(lb.value(u, c) for c in C), np.zeros(2), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 5000})
    assert total <= res.fun + 1e-9
    np.testing.assert_allclose(z, res.x, atol=1e-5)


def test_context_processes():
    rng = np.random.default_rng(0)
    seq = FixedSequence([[0.2, 0.3], [0.4, 0.5]])
    np.testing.assert_array_equal(sample_context(seq, None, 0, rng), [0.2, 0.3])
    with pytest.raises(ExhaustedSequence):
        sample_context(seq, None, 2, rng)
    u = np.array([sample_context(IIDUniform(3), None, t, rng) for t in range(1000)])
    assert u.min() >= 0 and u.max() <= 1
    pk = PKContexts(1, 1)
    s = np.array([pk.sample(t, rng) for t in range(10_000)])
    assert s.min() >= 0.25 and s.max() <= 0.75
    pk3 = PKContexts(2, 3)
    part = Partition(2, 3)
    for _ in range(1000):
        c = sample_context(pk3, part, 0, rng)
        assert np.max(np.abs(c - part.barycenter(part.cell_of(c)))) <= 1 / 12 + 1e-15
    with pytest.raises(ValueError):
        sample_context(pk3, Partition(2, 4), 0, rng)


def test_pk_cell_frequencies_uniform():
    rng = np.random.default_rng(5)
    pk = PKContexts(2, 3)
    n = 90_000
    cells = np.array([pk.partition.cell_of(pk.sample(t, rng)) for t in range(n)])
    counts = np.bincount(cells, minlength=9)
    p = 1 / 9
    assert np.all(np.abs(counts - n * p) <= 4 * math.sqrt(n * p * (1 - p)))


def test_factories():
    q = make_loss({"kind": "quadratic", "A": [[0.5], [0.0]], "v": [0.0, 0.0]}, Ball.unit(2), 1, 100)
    assert isinstance(q, ContextualQuadratic)
    lb = make_loss({"kind": "lower_bound"}, Ball.unit(2), 1, 1024)
    assert lb.K == lower_bound_K(1.0, 1.0, 1, 1024) == 10
    g0 = make_loss({"kind": "lower_bound_gamma0"}, Ball.unit(2), 1, 1024)
    assert g0.gamma == 0.0 and g0.K == 1024
    assert isinstance(make_context_process({"kind": "pk", "K": 4}, 1), PKContexts)
    with pytest.raises(ValueError):
        make_loss({"kind": "cubic"}, Ball.unit(2), 1, 10)
