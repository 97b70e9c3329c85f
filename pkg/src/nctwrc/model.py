"""The relay transmission-control MDP: states, actions, kernel and costs.

States are ``(b1, b2, g1, g2)``: queue occupancies ``b_i in {0..L_i+1}`` and
channel states ``g_i in {1..K_i}``. Arrays indexed by state use 0-based channel
indices and row-major order over ``(b1, b2, g1, g2)``, with ``g2`` varying
fastest and ``b1`` slowest. Actions are indexed lexicographically::

    0: (0, 0)  idle
    1: (0, 1)  forward from queue 2
    2: (1, 0)  forward from queue 1
    3: (1, 1)  XOR both and broadcast
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .channel import ChannelConfig, ChannelModel, build_channel, _write_text

__all__ = [
    "ACTIONS",
    "ConfigurationError",
    "ModelParams",
    "State",
    "StateSpace",
    "TransitionKernel",
    "RelayMDP",
    "next_queue_occupancy",
    "queue_transition_prob",
    "queue_matrix",
    "holding_cost",
    "immediate_cost",
    "cost_table",
    "build_kernel",
    "build_model",
]

ACTIONS = ((0, 0), (0, 1), (1, 0), (1, 1))
ACTION_A1 = np.array([a[0] for a in ACTIONS])
ACTION_A2 = np.array([a[1] for a in ACTIONS])
ROW_SUM_TOL = 1e-12


class ConfigurationError(ValueError):
    """Invalid model parameters or out-of-range state/action inputs."""


@dataclass(frozen=True)
class ModelParams:
    """All scalars defining one MDP instance.

    Unit costs: ``lambda_hold`` per held symbol per epoch, ``xi_overflow`` per
    lost symbol, ``tau_tx`` per transmission, ``eta_err`` per expected symbol
    error. ``beta`` is the discount factor.
    """

    L1: int
    L2: int
    p1: float
    p2: float
    lambda_hold: float
    xi_overflow: float
    tau_tx: float
    eta_err: float
    beta: float
    channel1: ChannelConfig
    channel2: ChannelConfig

    def __post_init__(self):
        for name in ("L1", "L2"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigurationError(f"{name} must be an integer >= 1, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v!r}")
        if not self.lambda_hold > 0:
            raise ConfigurationError("lambda_hold must be > 0")
        if not self.xi_overflow > self.lambda_hold:
            raise ConfigurationError("xi_overflow must exceed lambda_hold (convex holding cost)")
        if not self.tau_tx > self.lambda_hold:
            raise ConfigurationError("tau_tx must exceed lambda_hold")
        if not self.eta_err >= 0:
            raise ConfigurationError("eta_err must be >= 0")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigurationError("beta must lie in [0, 1)")
        for name in ("channel1", "channel2"):
            if not isinstance(getattr(self, name), ChannelConfig):
                raise ConfigurationError(f"{name} must be a ChannelConfig")

    @property
    def L(self):
        return (self.L1, self.L2)

    @property
    def p(self):
        return (self.p1, self.p2)


class State(NamedTuple):
    b1: int
    b2: int
    g1: int  # 1-based
    g2: int  # 1-based


@dataclass(frozen=True)
class StateSpace:
    """Dense indexing of ``B1 x B2 x G1 x G2``."""

    L1: int
    L2: int
    K1: int
    K2: int

    @property
    def shape(self):
        return (self.L1 + 2, self.L2 + 2, self.K1, self.K2)

    @property
    def n(self) -> int:
        return int(np.prod(self.shape))

    def index(self, state) -> int:
        b1, b2, g1, g2 = state
        self.validate(state)
        return int(np.ravel_multi_index((b1, b2, g1 - 1, g2 - 1), self.shape))

    def state(self, idx: int) -> State:
        b1, b2, g1, g2 = np.unravel_index(int(idx), self.shape)
        return State(int(b1), int(b2), int(g1) + 1, int(g2) + 1)

    def validate(self, state) -> None:
        b1, b2, g1, g2 = state
        if not (0 <= b1 <= self.L1 + 1 and 0 <= b2 <= self.L2 + 1):
            raise ConfigurationError(f"queue occupancy out of range in {tuple(state)}")
        if not (1 <= g1 <= self.K1 and 1 <= g2 <= self.K2):
            raise ConfigurationError(f"channel state out of range in {tuple(state)}")

    def __iter__(self):
        for b1, b2, g1, g2 in itertools.product(*(range(s) for s in self.shape)):
            yield State(b1, b2, g1 + 1, g2 + 1)

    def grids(self):
        """Coordinate arrays ``(b1, b2, g1, g2)`` (0-based g), each of ``shape``."""
        return np.meshgrid(*(np.arange(s) for s in self.shape), indexing="ij")


def _check_queue_args(b, a, L):
    if int(L) != L or L < 1:
        raise ConfigurationError(f"capacity must be an integer >= 1, got {L!r}")
    if not 0 <= b <= L + 1:
        raise ConfigurationError(f"occupancy {b} outside 0..{L + 1}")
    if a not in (0, 1):
        raise ConfigurationError(f"departure must be 0 or 1, got {a!r}")


def next_queue_occupancy(b: int, a: int, f: int, L: int) -> int:
    """``min([b - a]^+, L) + f``: depart, drop overflow, then admit arrival."""
    _check_queue_args(b, a, L)
    if f not in (0, 1):
        raise ConfigurationError(f"arrival must be 0 or 1, got {f!r}")
    return min(max(b - a, 0), L) + f


def queue_transition_prob(b: int, a: int, b_next: int, p: float, L: int) -> float:
    _check_queue_args(b, a, L)
    if not 0 <= b_next <= L + 1:
        raise ConfigurationError(f"occupancy {b_next} outside 0..{L + 1}")
    f = b_next - min(max(b - a, 0), L)
    if f == 1:
        return p
    if f == 0:
        return 1.0 - p
    return 0.0


def queue_matrix(L: int, p: float, a: int) -> np.ndarray:
    """Dense ``(L+2) x (L+2)`` queue transition matrix for departure ``a``."""
    B = L + 2
    M = np.zeros((B, B))
    for b in range(B):
        base = min(max(b - a, 0), L)
        M[b, base] += 1.0 - p
        M[b, base + 1] += p
    return M


def holding_cost(y: int, L: int, lambda_hold: float, xi_overflow: float) -> float:
    """Holding plus overflow cost for post-decision occupancy ``y = b - a``."""
    if not -1 <= y <= L + 1:
        raise ConfigurationError(f"post-decision occupancy {y} outside -1..{L + 1}")
    yp = max(y, 0)
    return lambda_hold * min(yp, L) + (xi_overflow if yp == L + 1 else 0.0)


def immediate_cost(state, action, params: ModelParams, channels) -> float:
    """Cost of taking ``action`` in ``state``.

    Holding/overflow for both queues, plus ``eta * a_i * P_e(g_{-i})`` (the
    symbol leaving queue ``i`` goes out over the *other* user's channel), plus
    ``tau`` whenever anything is transmitted.
    """
    b1, b2, g1, g2 = state
    a1, a2 = action
    ch1, ch2 = channels
    if a1 not in (0, 1) or a2 not in (0, 1):
        raise ConfigurationError(f"invalid action {tuple(action)}")
    if not (1 <= g1 <= ch1.K and 1 <= g2 <= ch2.K):
        raise ConfigurationError(f"channel state out of range in {tuple(state)}")
    cost = holding_cost(b1 - a1, params.L1, params.lambda_hold, params.xi_overflow)
    cost += holding_cost(b2 - a2, params.L2, params.lambda_hold, params.xi_overflow)
    cost += params.eta_err * (a1 * ch2.error_prob[g2 - 1] + a2 * ch1.error_prob[g1 - 1])
    if a1 or a2:
        cost += params.tau_tx
    return float(cost)


def cost_table(params: ModelParams, channels, space: StateSpace | None = None) -> np.ndarray:
    """Vectorised ``C(x, a)`` as an ``(n_states, 4)`` array."""
    ch1, ch2 = channels
    if space is None:
        space = StateSpace(params.L1, params.L2, ch1.K, ch2.K)
    b1, b2, g1, g2 = (g.ravel() for g in space.grids())
    lam, xi = params.lambda_hold, params.xi_overflow

    def h(y, L):
        yp = np.maximum(y, 0)
        return lam * np.minimum(yp, L) + xi * (yp == L + 1)

    pe_via2 = ch2.error_prob[g2]  # error prob for a symbol leaving queue 1
    pe_via1 = ch1.error_prob[g1]
    C = np.empty((space.n, len(ACTIONS)))
    for k, (a1, a2) in enumerate(ACTIONS):
        C[:, k] = (h(b1 - a1, params.L1) + h(b2 - a2, params.L2)
                   + params.eta_err * (a1 * pe_via2 + a2 * pe_via1)
                   + (params.tau_tx if (a1 or a2) else 0.0))
    return C


@dataclass(frozen=True)
class TransitionKernel:
    """Sparse kernel: one CSR ``n x n`` matrix per action.

    Built as ``kron(Pq1[a1], Pq2[a2], Pg1, Pg2)``, which matches the row-major
    state order and the factorised law of the queues and channels.
    """

    space: StateSpace
    matrices: tuple

    def successors(self, state_idx: int, action: int):
        """List of ``(next_state_index, probability)`` pairs."""
        M = self.matrices[action]
        lo, hi = M.indptr[state_idx], M.indptr[state_idx + 1]
        return list(zip(M.indices[lo:hi].tolist(), M.data[lo:hi].tolist()))

    def prob(self, state_idx: int, action: int, next_idx: int) -> float:
        return float(self.matrices[action][state_idx, next_idx])

    def to_csv(self, path_or_buf) -> None:
        rows = ["b1,b2,g1,g2,a1,a2,nb1,nb2,ng1,ng2,prob"]
        for i in range(self.space.n):
            s = self.space.state(i)
            for k, (a1, a2) in enumerate(ACTIONS):
                for j, pr in self.successors(i, k):
                    t = self.space.state(j)
                    rows.append(f"{s.b1},{s.b2},{s.g1},{s.g2},{a1},{a2},"
                                f"{t.b1},{t.b2},{t.g1},{t.g2},{pr!r}")
        _write_text(path_or_buf, "\n".join(rows) + "\n")


def build_kernel(params: ModelParams, channels, space: StateSpace | None = None) -> TransitionKernel:
    ch1, ch2 = channels
    if space is None:
        space = StateSpace(params.L1, params.L2, ch1.K, ch2.K)
    for name, ch in (("channel1", ch1), ("channel2", ch2)):
        rows = np.asarray(ch.transition).sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
            raise ConfigurationError(f"{name} transition rows do not sum to 1")
    Pg = sp.kron(sp.csr_matrix(ch1.transition), sp.csr_matrix(ch2.transition), format="csr")
    mats = []
    for a1, a2 in ACTIONS:
        Pb = sp.kron(sp.csr_matrix(queue_matrix(params.L1, params.p1, a1)),
                     sp.csr_matrix(queue_matrix(params.L2, params.p2, a2)), format="csr")
        M = sp.kron(Pb, Pg, format="csr")
        M.eliminate_zeros()
        M.sort_indices()
        mats.append(M)
    for k, M in enumerate(mats):
        err = np.max(np.abs(np.asarray(M.sum(axis=1)).ravel() - 1.0))
        if err > ROW_SUM_TOL:
            raise ConfigurationError(f"kernel rows for action {ACTIONS[k]} deviate from 1 by {err:.3g}")
    return TransitionKernel(space, tuple(mats))


@dataclass(frozen=True)
class RelayMDP:
    """A fully built instance: parameters, channels, state space, kernel, costs."""

    params: ModelParams
    channel1: ChannelModel
    channel2: ChannelModel
    space: StateSpace
    kernel: TransitionKernel
    costs: np.ndarray = field(repr=False)

    @property
    def channels(self):
        return (self.channel1, self.channel2)

    @property
    def beta(self) -> float:
        return self.params.beta

    def cost(self, state, action) -> float:
        return immediate_cost(state, action, self.params, self.channels)

    def cost_grid(self) -> np.ndarray:
        """Costs reshaped to ``space.shape + (4,)``."""
        return self.costs.reshape(self.space.shape + (len(ACTIONS),))

    def with_beta(self, beta: float) -> "RelayMDP":
        from dataclasses import replace
        return replace(self, params=replace(self.params, beta=beta))

    def costs_to_csv(self, path_or_buf) -> None:
        rows = ["b1,b2,g1,g2,a1,a2,cost"]
        for i, s in enumerate(self.space):
            for k, (a1, a2) in enumerate(ACTIONS):
                rows.append(f"{s.b1},{s.b2},{s.g1},{s.g2},{a1},{a2},{self.costs[i, k]!r}")
        _write_text(path_or_buf, "\n".join(rows) + "\n")


def build_model(params: ModelParams) -> RelayMDP:
    ch1 = build_channel(params.channel1)
    ch2 = build_channel(params.channel2)
    space = StateSpace(params.L1, params.L2, ch1.K, ch2.K)
    kernel = build_kernel(params, (ch1, ch2), space)
    costs = cost_table(params, (ch1, ch2), space)
    costs.setflags(write=False)
    return RelayMDP(params, ch1, ch2, space, kernel, costs)
