import numpy as np
import pytest

from ctxbandit.baselines import EpsNet, EpsNetUCB, UcbState, select_arm, update_arm
from ctxbandit.exceptions import NoPendingQuery, PendingQuery
from ctxbandit.geometry import Ball, Polytope


def test_select_arm_examples():
    st = UcbState.empty(3)
    assert select_arm(st, 1) == 0
    two = UcbState(np.array([100, 100]), np.array([0.1, 0.9]))
    assert select_arm(two, 1000) == 0
    tie = UcbState(np.array([5, 5, 5]), np.array([0.4, 0.4, 0.4]))
    assert select_arm(tie, 20) == 0
    partial = UcbState(np.array([3, 0, 0]), np.array([0.0, 0.0, 0.0]))
    assert select_arm(partial, 4) == 1
    with pytest.raises(ValueError):
        select_arm(st, 0)


def test_update_arm_examples():
    st = UcbState.empty(2)
    update_arm(st, 1, 0.5)
    assert st.means[1] == 0.5 and st.counts[1] == 1
    st = UcbState.empty(1)
    update_arm(st, 0, 0.0)
    update_arm(st, 0, 1.0)
    assert st.means[0] == 0.5
    st = UcbState.empty(1)
    for _ in range(10_000):
        update_arm(st, 0, 1.0)
    assert abs(st.means[0] - 1.0) <= 1e-12 and st.counts[0] == 10_000


def test_suboptimal_pull_fraction():
    fractions = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        st = UcbState.empty(2)
        bad = 0
        for t in range(1, 10_001):
            arm = select_arm(st, t)
            bad += arm == 1
            update_arm(st, arm, 0.5 * arm + 0.1 * rng.standard_normal())
        fractions.append(bad / 10_000)
    assert np.mean(fractions) < 0.05


def test_eps_net_points_in_body():
    for body in (Ball.unit(2), Ball([1.0, -1.0, 0.5], 0.7), Polytope.simplex(2), Polytope.box([0, 0], [1, 2])):
        net = EpsNet.build(body, 0.2)
        assert len(net) > 0
        assert all(body.contains(x) for x in net.points)
        assert any(np.allclose(x, body.interior_point) for x in net.points)


def test_estimator_protocol():
    est = EpsNetUCB(Ball.unit(2), eps=0.5)
    with pytest.raises(NoPendingQuery):
        est.feed(0.0)
    z = est.propose()
    with pytest.raises(PendingQuery):
        est.propose()
    rec = est.feed(1.0)
    np.testing.assert_array_equal(rec.z, z)
    assert est.t_ == 1


def test_estimator_finds_good_arm():
    m = np.array([0.5, 0.0])
    est = EpsNetUCB(Ball.unit(2), eps=0.5).fit(lambda z: float((z - m) @ (z - m)), 3000)
    np.testing.assert_allclose(est.predict(), m)
