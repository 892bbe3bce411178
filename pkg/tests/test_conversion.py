import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxbandit.baselines import EpsNetUCB
from ctxbandit.bco import BarrierBCO, step_size
from ctxbandit.conversion import (ContextualRouter, ConversionParams, Partition, barycenter, cell_of, choose_K,
                                  expected_bias_bound, warn_if_short_horizon)
from ctxbandit.exceptions import OutOfCube
from ctxbandit.geometry import Ball
from ctxbandit.randomness import SeedStream


def test_cell_of_examples():
    part = Partition(2, 3)
    assert part.axis_index([0.5, 0.5]) == (1, 1)
    assert cell_of(part, [0.5, 0.5]) == 4
    assert part.axis_index([1.0, 0.0]) == (2, 0)
    assert cell_of(part, [1.0, 0.0]) == 6
    assert cell_of(Partition(1, 1), [0.73]) == 0
    with pytest.raises(OutOfCube):
        cell_of(part, [1.01, 0.5])
    with pytest.raises(OutOfCube):
        cell_of(part, [-1e-9, 0.5])


def test_barycenter_examples():
    part = Partition(2, 3)
    np.testing.assert_allclose(barycenter(part, 4), [0.5, 0.5])
    np.testing.assert_allclose(barycenter(Partition(3, 1), 0), [0.5, 0.5, 0.5])
    four = Partition(2, 4)
    np.testing.assert_allclose(barycenter(four, np.ravel_multi_index((0, 3), four.shape)), [0.125, 0.875])


@given(st.integers(1, 3), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_cells_tile_the_cube(p, K, seed):
    part = Partition(p, K)
    c = np.random.default_rng(seed).random(p)
    cell = part.cell_of(c)
    lo, hi = part.bounds(cell)
    assert np.all(lo <= c) and np.all(c <= hi)
    assert part.cell_of(part.barycenter(cell)) == cell


def test_choose_K_examples():
    assert choose_K(ConversionParams(1, 0.5, 1, L=0.0), 2, 1, 10 ** 4) == 1
    params = ConversionParams(1.0, 0.5, 1.0, L=1.0, gamma=1.0)
    inner = (10 ** 4) ** 0.5 / math.log(10_001)
    assert inner == pytest.approx(10.857, abs=1e-3)
    assert choose_K(params, 1, 1, 10 ** 4) == math.floor(inner ** (2 / 3)) == 4


def test_choose_K_strongly_convex_preset():
    params = ConversionParams.strongly_convex(rho=0.0, L=1.0, gamma=1.0)
    assert (params.tau1, params.tau2, params.tau3) == (1.0, 0.5, 1.0)
    T, d, p = 2 ** 16, 2, 1
    # independent evaluation in log space
    log_inner = -1.0 * math.log(d) + 0.5 * math.log(T) - math.log(math.log(T + 1))
    expected = max(1, math.floor(math.exp(log_inner / 1.5) + 1e-12))
    assert choose_K(params, d, p, T) == expected == 5


def test_conversion_params_validation():
    with pytest.raises(ValueError):
        ConversionParams(1, 1.0, 1)
    with pytest.raises(ValueError):
        ConversionParams(1, 0.5, 1, T0=0.5)
    with pytest.raises(ValueError):
        ConversionParams(1, 0.5, 1, gamma=0.0)


def test_bias_bound():
    assert expected_bias_bound(0.0, 1.0, 2, 3) == 0.0
    assert expected_bias_bound(1.0, 1.0, 1, 4) == 0.5
    vals = [expected_bias_bound(1.0, 0.5, 3, K) for K in range(1, 50)]
    assert np.all(np.diff(vals) <= 0)


def _bco(**kw):
    return BarrierBCO(Ball.unit(2).barrier(), alpha=1.0, M=2.0, **kw)


def quad(z, c):
    m = np.array([0.5 * c[0] - 0.25, 0.1])
    return 0.5 * float((z - m) @ (z - m))


def test_single_cell_reduction():
    for seed in range(5):
        root = SeedStream(seed, ("alg",))
        C = np.random.default_rng(seed).random((200, 1))
        router = ContextualRouter(_bco(), K=1, p=1, random_state=root).fit(C, quad)
        bare = _bco(random_state=root.child("cell:0"))
        bare.reset()
        for rec, c in zip(router.history_, C):
            z = bare.propose(c)
            r = bare.feed(quad(z, c))
            np.testing.assert_array_equal(rec.record.z, r.z)
            np.testing.assert_array_equal(rec.record.x, r.x)


def test_local_counters():
    C = np.array([[0.25], [0.75]] * 5)
    router = ContextualRouter(_bco(), K=2, p=1, random_state=0).fit(C, quad)
    rec5 = router.history_[4]
    assert rec5.cell == 0 and rec5.local_t == 3
    assert rec5.record.eta == step_size(3, router.instances_[0].config_)
    assert [r.local_t for r in router.history_] == [1, 1, 2, 2, 3, 3, 4, 4, 5, 5]


def test_conservation_and_lazy_instances():
    for seed in range(5):
        C = np.random.default_rng(seed).random((300, 2))
        router = ContextualRouter(_bco(), K=10, p=2, random_state=seed).fit(C, quad)
        assert sum(router.counts_.values()) == router.total_rounds_ == 300
        assert router.n_instances_ <= min(100, 300)
        assert set(router.instances_) == {Partition(2, 10).cell_of(c) for c in C}


def test_isolation_under_permutation():
    rng = np.random.default_rng(4)
    C = rng.random((120, 1))
    cells = np.array([Partition(1, 3).cell_of(c) for c in C])

    def per_cell(router):
        out = {}
        for r in router.history_:
            out.setdefault(r.cell, []).append((r.c.tobytes(), r.record.z.tobytes(), r.record.x.tobytes()))
        return out

    reference = per_cell(ContextualRouter(_bco(), K=3, p=1, random_state=11).fit(C, quad))
    for trial in range(3):
        # random interleaving of the cells that keeps each cell's own order
        keys = rng.random(len(C))
        order = np.lexsort((np.arange(len(C)), cells))
        slots = {k: list(order[cells[order] == k]) for k in range(3)}
        merged = []
        for k in np.argsort(keys):
            merged.append(slots[cells[k]].pop(0))
        other = ContextualRouter(_bco(), K=3, p=1, random_state=11).fit(C[merged], quad)
        assert per_cell(other) == reference


def test_router_predict():
    router = ContextualRouter(_bco(), K=2, p=1, random_state=0)
    C = np.array([[0.1], [0.2], [0.3]])
    router.fit(C, quad)
    P = router.predict([[0.1], [0.9]])
    np.testing.assert_array_equal(P[0], router.instances_[0].predict())
    np.testing.assert_allclose(P[1], [0.0, 0.0], atol=1e-12)  # unvisited cell: analytic center


def test_router_with_ucb_baseline():
    base = EpsNetUCB(Ball.unit(2), eps=0.5)
    C = np.random.default_rng(0).random((200, 1))
    router = ContextualRouter(base, K=1, p=1, random_state=0).fit(C, quad)
    bare = EpsNetUCB(Ball.unit(2), eps=0.5).reset()
    for rec, c in zip(router.history_, C):
        z = bare.propose(c)
        np.testing.assert_array_equal(rec.record.z, bare.feed(quad(z, c)).z)
    assert sum(router.counts_.values()) == 200


def test_short_horizon_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert warn_if_short_horizon(4, 2, 100, 10)
    assert "below" in caplog.text
    assert not warn_if_short_horizon(2, 1, 1000, 10)
