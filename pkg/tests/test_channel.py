import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nctwrc.channel import (
    ChannelConfig,
    ChannelError,
    build_channel,
    db_to_linear,
    equiprobable_boundaries,
    lcr_transition_matrix,
    level_crossing_rate,
    symbol_error_prob,
)
from nctwrc.structure import check_stochastic_dominance


def erfc_series(x, terms=60):
    """erfc via the Maclaurin series of erf; fine for moderate x."""
    s = [(-1) ** n * x ** (2 * n + 1) / (math.factorial(n) * (2 * n + 1)) for n in range(terms)]
    return 1.0 - 2.0 / math.sqrt(math.pi) * math.fsum(s)


def test_single_state_boundaries():
    b = equiprobable_boundaries(1, 2.5)
    assert b[0] == 0.0 and np.isinf(b[1])


def test_two_state_median():
    b = equiprobable_boundaries(2, 1.0)
    assert b[1] == pytest.approx(math.log(2), abs=1e-15)


def test_region_mass_by_quadrature():
    mean = 1.0
    b = equiprobable_boundaries(8, mean)
    density = lambda s: math.exp(-s / mean) / mean
    for k in range(8):
        mass, _ = quad(density, b[k], b[k + 1], epsabs=1e-13)
        assert abs(mass - 1 / 8) < 1e-10


def test_single_state_matrix():
    b = equiprobable_boundaries(1, 1.0)
    assert np.array_equal(lcr_transition_matrix(b, 1.0, 0.01), [[1.0]])


def test_lcr_matrix_recomputed_by_hand():
    K, mean, fdT = 8, 1.0, 0.01
    P = lcr_transition_matrix(equiprobable_boundaries(K, mean), mean, fdT)
    gam = [-mean * math.log(1 - k / K) for k in range(K)]
    N = [math.sqrt(2 * math.pi * g / mean) * fdT * math.exp(-g / mean) for g in gam]
    for k in range(K):
        up = N[k + 1] * K if k + 1 < K else 0.0
        down = N[k] * K if k > 0 else 0.0
        if k + 1 < K:
            assert P[k, k + 1] == pytest.approx(up, rel=1e-12)
        if k > 0:
            assert P[k, k - 1] == pytest.approx(down, rel=1e-12)
        assert P[k, k] == pytest.approx(1 - up - down, rel=1e-12)


def test_symmetric_off_diagonals():
    P = lcr_transition_matrix(equiprobable_boundaries(8, 2.0), 2.0, 0.01)
    assert np.array_equal(P, P.T)


def test_level_crossing_zero_at_ends():
    assert level_crossing_rate(np.array([0.0, np.inf]), 1.0, 0.01).tolist() == [0.0, 0.0]


def test_fast_fading_rejected():
    with pytest.raises(ChannelError):
        build_channel(ChannelConfig(8, 1.0, 0.3))


@pytest.mark.parametrize("bad", [dict(K=0, mean_snr=1.0), dict(K=2, mean_snr=-1.0),
                                 dict(K=2, mean_snr=1.0, doppler_symbol_product=0.0),
                                 dict(K=2, mean_snr=1.0, modulation="QPSK")])
def test_config_validation(bad):
    with pytest.raises(ChannelError):
        ChannelConfig(**bad)


def test_error_prob_endpoints():
    assert symbol_error_prob(0.0) == 0.5
    assert symbol_error_prob(np.inf) == 0.0


def test_error_prob_against_series():
    assert abs(symbol_error_prob(1.0) - 0.5 * erfc_series(1.0)) < 1e-12


def test_negative_snr_rejected():
    with pytest.raises(ChannelError):
        symbol_error_prob(-0.1)


def test_db_conversion():
    assert db_to_linear(0) == 1.0
    assert ChannelConfig.from_db(4, 3.0).mean_snr == pytest.approx(10 ** 0.3)
    assert ChannelConfig.from_db(4, 3.0).mean_snr_db == pytest.approx(3.0)


def test_built_channel_is_read_only():
    ch = build_channel(ChannelConfig(4, 1.0))
    with pytest.raises(ValueError):
        ch.transition[0, 0] = 0.0
    assert ch.error_prob_ext[-1] == 0.0 and ch.error_prob_ext.size == 5


def test_csv_export():
    import io
    buf = io.StringIO()
    build_channel(ChannelConfig(3, 1.0)).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "g,lower_snr,upper_snr,stationary,Pe,P_to_1,P_to_2,P_to_3"
    assert len(lines) == 4


channels = st.builds(
    ChannelConfig.from_db,
    st.integers(1, 10),
    st.floats(-5.0, 15.0),
    st.floats(1e-4, 0.02),
)


@settings(max_examples=60, deadline=None)
@given(channels)
def test_fsmc_invariants(cfg):
    ch = build_channel(cfg)
    P = ch.transition
    K = cfg.K
    assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12
    i, j = np.indices(P.shape)
    assert np.all(P[np.abs(i - j) > 1] == 0)
    assert np.allclose(P, P.T, atol=0, rtol=1e-12)
    assert np.allclose(ch.stationary, 1 / K, atol=1e-12)
    if K > 1:
        off = P[i != j]
        assert off.max() < np.diag(P).min()
    pe = ch.error_prob
    assert np.all(np.diff(pe) <= 0) and pe.max() <= 0.5
    assert check_stochastic_dominance(P).passed


@settings(max_examples=60, deadline=None)
@given(channels, st.data())
def test_dominance_lower_bound(cfg, data):
    """Row g+1 beats row g on any nondecreasing u by at least (1-2P_{g,g+1}) du."""
    ch = build_channel(cfg)
    K = cfg.K
    steps = data.draw(st.lists(st.floats(0, 10), min_size=K, max_size=K))
    u = np.cumsum(steps)
    P = ch.transition
    for g in range(K - 1):
        lhs = P[g + 1] @ u - P[g] @ u
        bound = (1 - 2 * P[g, g + 1]) * (u[g + 1] - u[g])
        assert lhs >= bound - 1e-9
        assert bound >= -1e-12
