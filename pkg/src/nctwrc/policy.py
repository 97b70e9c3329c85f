"""Threshold surfaces, induced Markov chains and long-run performance metrics."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .model import ACTION_A1, ACTION_A2, RelayMDP, StateSpace, _write_text
from .solver import Policy, induced_matrix, policy_evaluation_exact
from .structure import CheckReport, check_monotone_array

__all__ = [
    "ThresholdSurface",
    "ChainMetrics",
    "extract_thresholds",
    "threshold_policy",
    "simulate_chain",
    "stationary_metrics",
    "DEFAULT_INITIAL_STATE",
]

DEFAULT_INITIAL_STATE = (0, 0, 1, 1)


@dataclass(frozen=True)
class ThresholdSurface:
    """Per-slice switching thresholds.

    ``th1[b2, g1, g2]`` is the least ``b1`` with ``a1 = 1`` (``L1 + 2`` if the
    slice never transmits); ``th2[b1, g1, g2]`` likewise for queue 2. Channel
    indices are 0-based here and 1-based in CSV output. ``irregular1`` marks
    slices where ``a1`` is not a step function of ``b1``, so the threshold
    does not reproduce the policy there.
    """

    space: StateSpace
    th1: np.ndarray
    th2: np.ndarray
    irregular1: np.ndarray
    irregular2: np.ndarray

    def surface(self, i: int) -> np.ndarray:
        return self.th1 if i == 1 else self.th2

    @property
    def regular(self) -> bool:
        return not (self.irregular1.any() or self.irregular2.any())

    def check_nonincreasing(self, i: int, axes=("b", "g")) -> CheckReport:
        """Is ``b_th,i`` nonincreasing in ``b_{-i}`` and/or ``g_{-i}``?

        ``axes`` picks from ``"b"`` (the other queue), ``"g1"``, ``"g2"`` and
        ``"g"`` (shorthand for ``g_{-i}``).
        """
        other = 2 if i == 1 else 1
        names = (f"b{other}", "g1", "g2")
        idx = []
        for a in axes:
            if a == "b":
                a = f"b{other}"
            elif a == "g":
                a = f"g{other}"
            idx.append(names.index(a))
        return check_monotone_array(self.surface(i), idx, decreasing=True, names=names,
                                    check=f"b_th{i} nonincreasing", offset=(0, 1, 1))

    def to_csv(self, path_or_buf) -> None:
        """Rows ``queue,b_other,g1,g2,threshold,regular``."""
        rows = ["queue,b_other,g1,g2,threshold,regular"]
        for i, (th, irr) in enumerate(((self.th1, self.irregular1), (self.th2, self.irregular2)), start=1):
            for bo, g1, g2 in np.ndindex(*th.shape):
                rows.append(f"{i},{bo},{g1 + 1},{g2 + 1},{int(th[bo, g1, g2])},{int(not irr[bo, g1, g2])}")
        _write_text(path_or_buf, "\n".join(rows) + "\n")


def extract_thresholds(policy: Policy) -> ThresholdSurface:
    """``b_th,i = min{b_i : a_i = 1}`` on every ``(b_{-i}, g1, g2)`` slice."""
    space = policy.space
    a1 = policy.a1  # (B1, B2, K1, K2)
    a2 = np.moveaxis(policy.a2, 1, 0)  # (B2, B1, K1, K2): b2 first
    th = []
    irr = []
    for a, L in ((a1, space.L1), (a2, space.L2)):
        on = a == 1
        first = np.where(on.any(axis=0), np.argmax(on, axis=0), L + 2)
        step = np.arange(L + 2)[:, None, None, None] >= first[None]
        th.append(first.astype(np.int64))
        irr.append((step != on).any(axis=0))
    for arr in th + irr:
        arr.setflags(write=False)
    return ThresholdSurface(space, th[0], th[1], irr[0], irr[1])


def threshold_policy(surface: ThresholdSurface) -> Policy:
    """``a_i = 1{b_i >= b_th,i(b_{-i}, g1, g2)}``."""
    space = surface.space
    B1, B2, _, _ = space.grids()
    a1 = B1 >= surface.th1[None, :, :, :]
    a2 = B2 >= surface.th2[:, None, :, :]
    return Policy.from_components(space, a1.astype(int), a2.astype(int))


@dataclass
class ChainMetrics:
    """Discounted cost from one initial state plus long-run per-epoch averages.

    Per-user entries are ``(queue 1, queue 2)``. ``errors`` are expected symbol
    errors charged as in the cost (``a1 Pe(g2)``, ``a2 Pe(g1)``). ``se`` holds
    standard errors for Monte Carlo estimates (empty for exact results).
    """

    discounted_cost: float
    discounted_se: float
    truncation_bias: float
    held: tuple
    departures: tuple
    overflows: tuple
    errors: tuple
    transmissions: float
    coded_broadcasts: float
    cost_rate: float
    initial_state: tuple = DEFAULT_INITIAL_STATE
    method: str = "exact"
    se: dict = field(default_factory=dict)
    note: str = ""

    @property
    def held_total(self) -> float:
        return float(sum(self.held))

    def as_dict(self) -> dict:
        d = {
            "discounted_cost": self.discounted_cost,
            "discounted_se": self.discounted_se,
            "truncation_bias": self.truncation_bias,
            "held_1": self.held[0], "held_2": self.held[1], "held_total": self.held_total,
            "departures_1": self.departures[0], "departures_2": self.departures[1],
            "overflows_1": self.overflows[0], "overflows_2": self.overflows[1],
            "errors_1": self.errors[0], "errors_2": self.errors[1],
            "transmissions": self.transmissions,
            "coded_broadcasts": self.coded_broadcasts,
            "cost_rate": self.cost_rate,
        }
        return {k: float(v) for k, v in d.items()}

    def to_csv(self, path_or_buf) -> None:
        rows = ["metric,value,se"]
        for k, v in self.as_dict().items():
            se = self.se.get(k, "")
            rows.append(f"{k},{v!r},{se!r}" if se != "" else f"{k},{v!r},")
        _write_text(path_or_buf, "\n".join(rows) + "\n")


def _per_state_quantities(model: RelayMDP, policy: Policy) -> dict:
    """Per-epoch quantities as functions of the state under ``policy``."""
    space = model.space
    B1, B2, G1, G2 = (g.ravel() for g in space.grids())
    k = policy.actions
    a1, a2 = ACTION_A1[k], ACTION_A2[k]
    pe1 = np.asarray(model.channel1.error_prob)[G1]
    pe2 = np.asarray(model.channel2.error_prob)[G2]
    L1, L2 = space.L1, space.L2
    return {
        "held_1": np.minimum(B1, L1).astype(float),
        "held_2": np.minimum(B2, L2).astype(float),
        "departures_1": (a1 * (B1 >= 1)).astype(float),
        "departures_2": (a2 * (B2 >= 1)).astype(float),
        "overflows_1": (B1 - a1 == L1 + 1).astype(float),
        "overflows_2": (B2 - a2 == L2 + 1).astype(float),
        "errors_1": a1 * pe2,
        "errors_2": a2 * pe1,
        "transmissions": ((a1 + a2) > 0).astype(float),
        "coded_broadcasts": ((a1 == 1) & (a2 == 1) & (B1 >= 1) & (B2 >= 1)).astype(float),
        "cost_rate": model.costs[np.arange(space.n), k],
    }


def _metrics_from(avg: dict, **kw) -> ChainMetrics:
    return ChainMetrics(
        held=(avg["held_1"], avg["held_2"]),
        departures=(avg["departures_1"], avg["departures_2"]),
        overflows=(avg["overflows_1"], avg["overflows_2"]),
        errors=(avg["errors_1"], avg["errors_2"]),
        transmissions=avg["transmissions"],
        coded_broadcasts=avg["coded_broadcasts"],
        cost_rate=avg["cost_rate"],
        **kw,
    )


def truncation_bias_bound(model: RelayMDP, horizon: int) -> float:
    """``beta^H * C_max / (1 - beta)``: cost ignored by truncating at ``H``."""
    cmax = float(model.costs.max())
    return float(model.beta ** horizon * cmax / (1.0 - model.beta))


def _simulate_block(model, policy, quantities, horizon, burn, x0, seqs):
    """Run the replications whose seed sequences are ``seqs`` in lockstep."""
    space = model.space
    R = len(seqs)
    U = np.empty((R, horizon, 4))
    for r, ss in enumerate(seqs):
        U[r] = np.random.Generator(np.random.Philox(ss)).random((horizon, 4))
    shape = space.shape
    L1, L2 = space.L1, space.L2
    p1, p2 = model.params.p1, model.params.p2
    cum1 = np.cumsum(model.channel1.transition, axis=1)[:, :-1]
    cum2 = np.cumsum(model.channel2.transition, axis=1)[:, :-1]
    s = np.full(R, x0, dtype=np.int64)
    disc = np.zeros(R)
    tail = {k: np.zeros(R) for k in quantities}
    weight = 1.0
    acts = policy.actions
    for t in range(horizon):
        k = acts[s]
        disc += weight * model.costs[s, k]
        weight *= model.beta
        if t >= burn:
            for name, q in quantities.items():
                tail[name] += q[s]
        b1, b2, g1, g2 = np.unravel_index(s, shape)
        a1, a2 = ACTION_A1[k], ACTION_A2[k]
        u = U[:, t]
        nb1 = np.minimum(np.maximum(b1 - a1, 0), L1) + (u[:, 0] < p1)
        nb2 = np.minimum(np.maximum(b2 - a2, 0), L2) + (u[:, 1] < p2)
        ng1 = (cum1[g1] <= u[:, 2:3]).sum(axis=1)
        ng2 = (cum2[g2] <= u[:, 3:4]).sum(axis=1)
        s = np.ravel_multi_index((nb1, nb2, ng1, ng2), shape)
    n_tail = horizon - burn
    means = {k: v / n_tail for k, v in tail.items()} if n_tail > 0 else {k: np.full(R, np.nan) for k in tail}
    return disc, means


def simulate_chain(model: RelayMDP, policy: Policy, horizon: int, replications: int, seed: int,
                   initial_state=DEFAULT_INITIAL_STATE, burn_in: float = 0.1, threads: int = 1) -> ChainMetrics:
    """Monte Carlo over the chain induced by ``policy``.

    Each replication ``r`` draws from its own Philox stream spawned from
    ``SeedSequence(seed)``, so results do not depend on ``threads``. The
    discounted cost is truncated at ``horizon``; ``truncation_bias`` bounds the
    omitted tail. Long-run averages use epochs after ``burn_in * horizon``.
    """
    if horizon < 1 or replications < 1:
        raise ValueError("horizon and replications must be >= 1")
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in must be in [0, 1)")
    x0 = model.space.index(initial_state)
    burn = int(np.floor(burn_in * horizon))
    seqs = np.random.SeedSequence(int(seed)).spawn(replications)
    quantities = _per_state_quantities(model, policy)
    threads = max(1, int(threads))
    chunks = np.array_split(np.arange(replications), min(threads, replications))
    run = lambda idx: _simulate_block(model, policy, quantities, horizon, burn, x0, [seqs[i] for i in idx])
    if threads == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    disc = np.concatenate([p[0] for p in parts])
    means = {k: np.concatenate([p[1][k] for p in parts]) for k in quantities}
    R = replications
    se_of = lambda v: float(np.std(v, ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
    avg = {k: float(np.mean(v)) for k, v in means.items()}
    se = {k: se_of(v) for k, v in means.items()}
    se["discounted_cost"] = se_of(disc)
    return _metrics_from(
        avg,
        discounted_cost=float(np.mean(disc)),
        discounted_se=se["discounted_cost"],
        truncation_bias=truncation_bias_bound(model, horizon),
        initial_state=tuple(initial_state),
        method=f"monte carlo ({R} x {horizon}, seed {seed})",
        se=se,
    )


def _stationary_on(P: sp.csr_matrix) -> np.ndarray:
    """Stationary distribution of an irreducible stochastic matrix."""
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = spla.spsolve(A.tocsc(), rhs)
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    for _ in range(50):
        if np.max(np.abs(P.T @ pi - pi)) < 1e-12:
            break
        pi = P.T @ pi
        pi /= pi.sum()
    return pi


def long_run_distribution(P: sp.csr_matrix, x0: int):
    """Cesaro-limit distribution of the chain started at ``x0``.

    Returns ``(distribution, n_recurrent_classes, irreducible)``. Mass is split
    over the closed classes reachable from ``x0`` by absorption probability.
    """
    n = P.shape[0]
    reach = np.sort(breadth_first_order(P, x0, directed=True, return_predecessors=False))
    Pr = P[reach][:, reach].tocsr()
    ncomp, labels = connected_components(Pr, directed=True, connection="strong")
    coo = Pr.tocoo()
    leaves = labels[coo.row] != labels[coo.col]
    open_classes = set(labels[coo.row[leaves]].tolist())
    closed = [c for c in range(ncomp) if c not in open_classes]
    start = int(np.searchsorted(reach, x0))
    mu_r = np.zeros(len(reach))
    transient = np.flatnonzero(np.isin(labels, list(open_classes)))
    for c in closed:
        members = np.flatnonzero(labels == c)
        pi_c = _stationary_on(Pr[members][:, members].tocsr())
        if labels[start] == c:
            alpha = 1.0
        elif labels[start] in closed:
            alpha = 0.0
        else:
            T = transient
            A = sp.identity(len(T), format="csc") - Pr[T][:, T].tocsc()
            b = np.asarray(Pr[T][:, members].sum(axis=1)).ravel()
            h = spla.spsolve(A, b)
            alpha = float(np.atleast_1d(h)[int(np.searchsorted(T, start))])
        mu_r[members] += alpha * pi_c
    mu = np.zeros(n)
    mu[reach] = mu_r
    irreducible = ncomp == 1 and len(reach) == n
    return mu, len(closed), irreducible


def stationary_metrics(model: RelayMDP, policy: Policy, initial_state=DEFAULT_INITIAL_STATE) -> ChainMetrics:
    """Exact long-run averages of the chain induced by ``policy``.

    Reducible chains are handled through the recurrent classes reachable from
    ``initial_state``; the report's ``note`` says when that happened.
    """
    P = induced_matrix(model, policy)
    x0 = model.space.index(initial_state)
    mu, nclosed, irreducible = long_run_distribution(P, x0)
    resid = float(np.max(np.abs(P.T @ mu - mu)))
    if resid >= 1e-10:
        raise RuntimeError(f"stationary residual {resid:.3g} too large")
    quantities = _per_state_quantities(model, policy)
    avg = {k: float(mu @ v) for k, v in quantities.items()}
    V = policy_evaluation_exact(model, policy)
    note = "" if irreducible else (
        f"chain is not irreducible; averages use the {nclosed} recurrent class(es) reachable from {tuple(initial_state)}")
    return _metrics_from(avg, discounted_cost=float(V[x0]), discounted_se=0.0, truncation_bias=0.0,
                         initial_state=tuple(initial_state), method="exact", note=note)
