import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nctwrc.channel import build_channel
from nctwrc.model import (
    ACTIONS,
    ConfigurationError,
    ModelParams,
    StateSpace,
    build_kernel,
    build_model,
    cost_table,
    holding_cost,
    immediate_cost,
    next_queue_occupancy,
    queue_transition_prob,
)

from conftest import channel, fig_params


def reference_cost(b1, b2, g1, g2, a1, a2, P, pe1, pe2):
    """Straight-line evaluation of the cost formulas, one term at a time."""
    y1 = b1 - a1
    y1p = y1 if y1 > 0 else 0
    hold1 = P.lambda_hold * (y1p if y1p < P.L1 else P.L1)
    over1 = P.xi_overflow if y1p == P.L1 + 1 else 0.0
    y2 = b2 - a2
    y2p = y2 if y2 > 0 else 0
    hold2 = P.lambda_hold * (y2p if y2p < P.L2 else P.L2)
    over2 = P.xi_overflow if y2p == P.L2 + 1 else 0.0
    err = P.eta_err * (a1 * pe2[g2 - 1] + a2 * pe1[g1 - 1])
    tx = P.tau_tx if (a1 == 1 or a2 == 1) else 0.0
    return hold1 + over1 + hold2 + over2 + err + tx


@pytest.mark.parametrize("args,expected", [((0, 1, 0, 3), 0), ((4, 0, 1, 3), 4), ((3, 1, 1, 3), 3)])
def test_next_queue_occupancy_examples(args, expected):
    assert next_queue_occupancy(*args) == expected


@pytest.mark.parametrize("args", [(5, 0, 0, 3), (-1, 0, 0, 3), (1, 2, 0, 3), (1, 0, 2, 3), (1, 0, 0, 0)])
def test_next_queue_occupancy_rejects(args):
    with pytest.raises(ConfigurationError):
        next_queue_occupancy(*args)


def test_queue_transition_examples():
    assert queue_transition_prob(3, 1, 2, 0.1, 3) == pytest.approx(0.9)
    assert queue_transition_prob(3, 1, 3, 0.1, 3) == pytest.approx(0.1)
    # lost-symbol branch: full buffer, nothing leaves, no arrival
    assert queue_transition_prob(4, 0, 3, 0.37, 3) == pytest.approx(0.63)
    assert queue_transition_prob(4, 0, 1, 0.37, 3) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.data(), st.floats(0, 1))
def test_queue_transition_support(L, data, p):
    b = data.draw(st.integers(0, L + 1))
    a = data.draw(st.integers(0, 1))
    probs = [queue_transition_prob(b, a, bn, p, L) for bn in range(L + 2)]
    assert sum(probs) == pytest.approx(1.0, abs=1e-15)
    nz = [bn for bn in range(L + 2) if probs[bn] != 0 or bn in
          (min(max(b - a, 0), L), min(max(b - a, 0), L) + 1)]
    assert len(nz) == 2
    for f in (0, 1):
        assert 0 <= next_queue_occupancy(b, a, f, L) <= L + 1


def test_holding_cost_examples():
    assert holding_cost(-1, 3, 0.05, 4) == 0
    assert holding_cost(4, 3, 0.05, 4) == pytest.approx(4.15)
    assert holding_cost(2, 3, 0.05, 4) == pytest.approx(0.10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.floats(0.01, 5), st.floats(0.01, 20))
def test_holding_cost_convex_nondecreasing(L, lam, extra):
    xi = lam + extra
    h = [holding_cost(y, L, lam, xi) for y in range(-1, L + 2)]
    assert all(np.diff(h) >= 0)
    assert all(h[k + 1] + h[k - 1] - 2 * h[k] >= -1e-12 for k in range(1, len(h) - 1))


def test_immediate_cost_examples():
    P = fig_params(eta_err=2.0, tau_tx=1.0, channel1=channel(K=1), channel2=channel(K=1))
    chans = (build_channel(P.channel1), build_channel(P.channel2))
    assert chans[0].error_prob[0] == 0.5
    assert immediate_cost((0, 0, 1, 1), (0, 0), P, chans) == 0
    assert immediate_cost((1, 1, 1, 1), (1, 1), P, chans) == pytest.approx(3.0)


def test_cost_table_matches_reference(fig4_model):
    P = fig4_model.params
    pe1, pe2 = fig4_model.channel1.error_prob, fig4_model.channel2.error_prob
    for i, s in enumerate(fig4_model.space):
        for k, (a1, a2) in enumerate(ACTIONS):
            ref = reference_cost(*s, a1, a2, P, pe1, pe2)
            assert fig4_model.costs[i, k] == pytest.approx(ref, abs=1e-14)
            assert fig4_model.cost(s, (a1, a2)) == pytest.approx(ref, abs=1e-14)


def test_cross_channel_error_indexing(fig4_model):
    # a1 alone pays the error term of channel 2's state
    s = (1, 0, 8, 1)
    c = fig4_model.cost(s, (1, 0))
    pe2 = fig4_model.channel2.error_prob[0]
    assert c == pytest.approx(fig4_model.params.tau_tx + fig4_model.params.eta_err * pe2)


def test_cost_sanity(fig4_model):
    C = fig4_model.cost_grid()
    assert C.min() >= 0
    # idle action has no transmission or error terms
    lam, xi, L = 0.05, 4.0, 3
    b = np.arange(L + 2)
    h = lam * np.minimum(b, L) + xi * (b == L + 1)
    assert np.allclose(C[..., 0], h[:, None, None, None] + h[None, :, None, None])
    assert np.all(np.diff(C, axis=0) >= 0) and np.all(np.diff(C, axis=1) >= 0)


def test_power_delay_error_tradeoff():
    """Neither idling nor sending dominates at b=(1,0) across parameter choices."""
    cheap_tx = build_model(fig_params(tau_tx=0.06, eta_err=0.0))
    dear_tx = build_model(fig_params(tau_tx=1.0, eta_err=2.0))
    for m in (cheap_tx, dear_tx):
        for g1, g2 in itertools.product((1, 8), (1, 8)):
            assert m.cost((1, 0, g1, g2), (1, 0)) > 0 and m.cost((1, 0, g1, g2), (0, 0)) > 0
    assert cheap_tx.cost((1, 0, 1, 8), (1, 0)) > cheap_tx.cost((1, 0, 1, 8), (0, 0))
    assert dear_tx.cost((1, 0, 1, 8), (1, 0)) > dear_tx.cost((1, 0, 1, 8), (0, 0))
    # the comparison flips once holding dominates
    big_hold = build_model(fig_params(lambda_hold=0.9, tau_tx=1.0, eta_err=0.0))
    zero = big_hold.cost((1, 0, 1, 8), (1, 0)) < 2 * big_hold.cost((1, 0, 1, 8), (0, 0))
    assert zero


def test_state_space_bijection():
    sp_ = StateSpace(2, 1, 3, 2)
    idx = [sp_.index(s) for s in sp_]
    assert idx == list(range(sp_.n))
    assert all(sp_.state(i) == s for i, s in enumerate(sp_))
    with pytest.raises(ConfigurationError):
        sp_.index((4, 0, 1, 1))
    with pytest.raises(ConfigurationError):
        sp_.index((0, 0, 0, 1))


def test_kernel_tiny_support():
    m = build_model(fig_params(L1=1, L2=1, channel1=channel(K=1), channel2=channel(K=1)))
    for i in range(m.space.n):
        for k in range(4):
            assert len(m.kernel.successors(i, k)) <= 4


def test_kernel_rows_sum_to_one(fig4_model):
    for M in fig4_model.kernel.matrices:
        assert np.max(np.abs(np.asarray(M.sum(axis=1)).ravel() - 1)) <= 1e-12


def test_kernel_factor_probes(fig4_model):
    rng = np.random.default_rng(11)
    m = fig4_model
    P = m.params
    P1, P2 = m.channel1.transition, m.channel2.transition
    for _ in range(3000):
        i = int(rng.integers(m.space.n))
        k = int(rng.integers(4))
        if rng.random() < 0.5:
            j = int(rng.integers(m.space.n))
        else:
            succ = m.kernel.successors(i, k)
            j = succ[int(rng.integers(len(succ)))][0]
        s, t = m.space.state(i), m.space.state(j)
        a1, a2 = ACTIONS[k]
        expect = (queue_transition_prob(s.b1, a1, t.b1, P.p1, P.L1)
                  * queue_transition_prob(s.b2, a2, t.b2, P.p2, P.L2)
                  * P1[s.g1 - 1, t.g1 - 1] * P2[s.g2 - 1, t.g2 - 1])
        assert m.kernel.prob(i, k, j) == pytest.approx(expect, rel=1e-12, abs=1e-300)


def test_kernel_rejects_bad_channel(fig4_model):
    class Fake:
        K = 2
        transition = np.array([[0.9, 0.2], [0.5, 0.5]])
    P = fig_params(channel1=channel(K=2), channel2=channel(K=2))
    with pytest.raises(ConfigurationError):
        build_kernel(P, (Fake(), Fake()))


@pytest.mark.parametrize("bad", [
    dict(lambda_hold=0.0), dict(xi_overflow=0.05), dict(tau_tx=0.01), dict(eta_err=-1.0),
    dict(beta=1.0), dict(beta=-0.1), dict(p1=1.2), dict(L1=0), dict(L2=2.5),
])
def test_params_validation(bad):
    with pytest.raises(ConfigurationError):
        fig_params(**bad)


def test_csv_exports(fig4_model):
    buf = io.StringIO()
    fig4_model.costs_to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "b1,b2,g1,g2,a1,a2,cost" and len(lines) == 1 + 4 * fig4_model.space.n
    small = build_model(fig_params(L1=1, L2=1, channel1=channel(K=2), channel2=channel(K=2)))
    buf = io.StringIO()
    small.kernel.to_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0].startswith("b1,b2,g1,g2,a1,a2,nb1")
    assert len(rows) - 1 == sum(M.nnz for M in small.kernel.matrices)


small_params = st.builds(
    lambda L1, L2, p1, p2, lam, dxi, dtau, eta, beta, K1, K2: ModelParams(
        L1, L2, p1, p2, lam, lam + dxi, lam + dtau, eta, beta, channel(K=K1), channel(K=K2)),
    st.integers(1, 3), st.integers(1, 3), st.floats(0, 1), st.floats(0, 1),
    st.floats(0.01, 1), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 5),
    st.floats(0, 0.99), st.integers(1, 4), st.integers(1, 4),
)


@settings(max_examples=40, deadline=None)
@given(small_params)
def test_random_models_well_formed(P):
    m = build_model(P)
    for M in m.kernel.matrices:
        assert np.max(np.abs(np.asarray(M.sum(axis=1)).ravel() - 1)) <= 1e-12
    C = m.cost_grid()
    assert C.min() >= 0
    assert np.all(np.diff(C, axis=0) >= -1e-12) and np.all(np.diff(C, axis=1) >= -1e-12)
    assert np.allclose(m.costs, cost_table(P, m.channels))
