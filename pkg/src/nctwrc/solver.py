"""Discounted value iteration, exact policy evaluation and a monotone sweep."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ACTIONS, ACTION_A1, ACTION_A2, RelayMDP, StateSpace, _write_text

__all__ = [
    "TIE_TOL",
    "Policy",
    "VIResult",
    "ConvergenceError",
    "ConditionViolation",
    "MonotonicityViolation",
    "bellman_q",
    "greedy",
    "value_iteration",
    "policy_evaluation_exact",
    "induced_matrix",
    "monotone_value_iteration",
    "stopping_threshold",
]

TIE_TOL = 1e-10


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual, result=None):
        super().__init__(message)
        self.residual = residual
        self.result = result


class ConditionViolation(RuntimeError):
    """A structural precondition does not hold; carries the failing report."""

    def __init__(self, report):
        super().__init__(f"structural precondition failed:\n{report.to_text()}")
        self.report = report


class MonotonicityViolation(RuntimeError):
    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class Policy:
    """Deterministic stationary policy: an action index per dense state index."""

    space: StateSpace
    actions: np.ndarray

    def __post_init__(self):
        acts = np.asarray(self.actions, dtype=np.int64).ravel()
        if acts.size != self.space.n:
            raise ValueError(f"policy has {acts.size} entries for {self.space.n} states")
        if acts.min(initial=0) < 0 or acts.max(initial=0) >= len(ACTIONS):
            raise ValueError("policy entries must be action indices 0..3")
        acts.setflags(write=False)
        object.__setattr__(self, "actions", acts)

    @classmethod
    def from_components(cls, space: StateSpace, a1, a2) -> "Policy":
        a1 = np.broadcast_to(np.asarray(a1, dtype=np.int64), space.shape).ravel()
        a2 = np.broadcast_to(np.asarray(a2, dtype=np.int64), space.shape).ravel()
        return cls(space, 2 * a1 + a2)

    @classmethod
    def constant(cls, space: StateSpace, action) -> "Policy":
        return cls(space, np.full(space.n, ACTIONS.index(tuple(action))))

    @property
    def a1(self) -> np.ndarray:
        return ACTION_A1[self.actions].reshape(self.space.shape)

    @property
    def a2(self) -> np.ndarray:
        return ACTION_A2[self.actions].reshape(self.space.shape)

    def component(self, i: int) -> np.ndarray:
        return self.a1 if i == 1 else self.a2

    def __call__(self, state):
        return ACTIONS[self.actions[self.space.index(state)]]

    def __eq__(self, other):
        return (isinstance(other, Policy) and self.space == other.space
                and np.array_equal(self.actions, other.actions))

    def __hash__(self):
        return hash((self.space, self.actions.tobytes()))

    def to_csv(self, path_or_buf, values=None) -> None:
        """One row per state: ``b1,b2,g1,g2,a1,a2[,V]``."""
        header = "b1,b2,g1,g2,a1,a2" + (",V" if values is not None else "")
        rows = [header]
        for i, s in enumerate(self.space):
            a1, a2 = ACTIONS[self.actions[i]]
            line = f"{s.b1},{s.b2},{s.g1},{s.g2},{a1},{a2}"
            if values is not None:
                line += f",{float(values[i])!r}"
            rows.append(line)
        _write_text(path_or_buf, "\n".join(rows) + "\n")


@dataclass
class VIResult:
    values: np.ndarray
    q: np.ndarray
    policy: Policy
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = True

    @property
    def space(self) -> StateSpace:
        return self.policy.space

    def value_grid(self) -> np.ndarray:
        return self.values.reshape(self.space.shape)

    def q_grid(self) -> np.ndarray:
        """``Q`` reshaped to ``(B1, B2, K1, K2, 2, 2)`` indexed by ``(a1, a2)`` last."""
        return self.q.reshape(self.space.shape + (2, 2))


def stopping_threshold(tol: float, beta: float) -> float:
    """Sup-norm residual below which the greedy policy is ``tol``-optimal."""
    if beta == 0:
        return np.inf
    return tol * (1.0 - beta) / (2.0 * beta)


def bellman_q(model: RelayMDP, values: np.ndarray, costs: np.ndarray | None = None) -> np.ndarray:
    """``Q(x, a) = C(x, a) + beta * sum_x' P(x'|x, a) V(x')`` for all pairs."""
    C = model.costs if costs is None else costs
    Q = np.empty_like(C, dtype=float)
    for k, M in enumerate(model.kernel.matrices):
        Q[:, k] = C[:, k] + model.beta * (M @ values)
    return Q


def greedy(Q: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Row-wise argmin; among actions within ``tie_tol`` of the minimum the
    lexicographically smallest wins."""
    m = Q.min(axis=1, keepdims=True)
    return np.argmax(Q <= m + tie_tol, axis=1)


def value_iteration(model: RelayMDP, tolerance: float = 1e-8, max_iters: int = 100_000,
                    callback=None, log=None) -> VIResult:
    """Jacobi value iteration from ``V = 0``.

    Stops once ``max|V_n - V_{n-1}| < tolerance * (1 - beta) / (2 beta)``; with
    ``beta = 0`` a single sweep is exact. ``callback(n, V_n, Q_n)`` is invoked
    after every sweep; ``log`` is a text stream receiving ``"n residual"`` lines.

    Raises
    ------
    ConvergenceError
        If the threshold is not reached within ``max_iters`` sweeps.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    threshold = stopping_threshold(tolerance, model.beta)
    V = np.zeros(model.space.n)
    residuals = []
    Q = None
    for n in range(1, max_iters + 1):
        Q = bellman_q(model, V)
        V_new = Q.min(axis=1)
        res = float(np.max(np.abs(V_new - V)))
        residuals.append(res)
        V = V_new
        if log is not None:
            log.write(f"{n} {res!r}\n")
        if callback is not None:
            callback(n, V, Q)
        if res < threshold:
            policy = Policy(model.space, greedy(Q))
            return VIResult(V, Q, policy, n, residuals, True)
    result = VIResult(V, Q, Policy(model.space, greedy(Q)), max_iters, residuals, False)
    raise ConvergenceError(
        f"value iteration did not converge in {max_iters} sweeps (last residual {residuals[-1]:.3g})",
        residuals[-1], result)


def induced_matrix(model: RelayMDP, policy: Policy) -> sp.csr_matrix:
    """Transition matrix of the Markov chain induced by ``policy``."""
    n = model.space.n
    P = None
    for k, M in enumerate(model.kernel.matrices):
        D = sp.diags((policy.actions == k).astype(float), format="csr")
        P = D @ M if P is None else P + D @ M
    P = P.tocsr()
    P.eliminate_zeros()
    assert P.shape == (n, n)
    return P


def policy_evaluation_exact(model: RelayMDP, policy: Policy, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve ``V = C_theta + beta P_theta V`` exactly (sparse LU).

    A few steps of iterative refinement bring the residual below
    ``residual_tol``; if the direct solve is unavailable, fixed-point iteration
    is used instead.
    """
    n = model.space.n
    C = model.costs[np.arange(n), policy.actions]
    P = induced_matrix(model, policy)
    A = (sp.identity(n, format="csc") - model.beta * P).tocsc()
    try:
        lu = spla.splu(A)
        V = lu.solve(C)
        for _ in range(5):
            r = C - A @ V
            if np.max(np.abs(r)) < residual_tol:
                break
            V = V + lu.solve(r)
    except RuntimeError:
        V = _fixed_point(P, C, model.beta, residual_tol)
    r = np.max(np.abs(C - A @ V)) if n else 0.0
    if r >= residual_tol:
        V = _fixed_point(P, C, model.beta, residual_tol, V)
    return V


def _fixed_point(P, C, beta, tol, V=None):
    V = np.zeros_like(C) if V is None else V.copy()
    while True:
        V_new = C + beta * (P @ V)
        if np.max(np.abs(V_new - V)) * max(1.0, beta / max(1e-300, 1 - beta)) < tol:
            return V_new
        V = V_new


@dataclass
class MonotoneVIResult:
    values: np.ndarray
    policy: Policy
    iterations: int
    candidate_evaluations: int
    full_evaluations: int
    residuals: list = field(default_factory=list)


def _restricted_sweep(Q4: np.ndarray):
    """Minimise over actions visiting ``b1`` then ``b2`` in increasing order.

    Candidate set at ``(b1, b2, g)``: ``a1 >= a1*(b1-1, b2, g)`` and
    ``a2 >= a2*(b1, b2-1, g)``. Returns the minimum, the chosen action and the
    number of candidates examined.
    """
    B1, B2 = Q4.shape[:2]
    gshape = Q4.shape[2:4]
    a1_star = np.zeros((B1, B2) + gshape, dtype=np.int64)
    a2_star = np.zeros((B1, B2) + gshape, dtype=np.int64)
    best = np.empty((B1, B2) + gshape, dtype=np.int64)
    vmin = np.empty((B1, B2) + gshape)
    count = 0
    for b1 in range(B1):
        for b2 in range(B2):
            lb1 = a1_star[b1 - 1, b2] if b1 > 0 else np.zeros(gshape, dtype=np.int64)
            lb2 = a2_star[b1, b2 - 1] if b2 > 0 else np.zeros(gshape, dtype=np.int64)
            allowed = ((ACTION_A1[None, None, :] >= lb1[..., None])
                       & (ACTION_A2[None, None, :] >= lb2[..., None]))
            count += int(allowed.sum())
            q = np.where(allowed, Q4[b1, b2], np.inf)
            m = q.min(axis=-1, keepdims=True)
            k = np.argmax(q <= m + TIE_TOL, axis=-1)
            best[b1, b2] = k
            vmin[b1, b2] = m[..., 0]
            a1_star[b1, b2] = ACTION_A1[k]
            a2_star[b1, b2] = ACTION_A2[k]
    return vmin, best, count


def monotone_value_iteration(model: RelayMDP, tolerance: float = 1e-8, max_iters: int = 100_000,
                             verify: str = "final") -> MonotoneVIResult:
    """Value iteration whose argmin exploits monotonicity of ``a_i`` in ``b_i``.

    Only runs when the overflow-cost condition certifying that structure
    holds. ``verify="final"`` compares the restricted argmin with the full one
    after convergence; ``"every"`` does so after each sweep (the full pass is
    not counted in ``candidate_evaluations``).

    Raises
    ------
    ConditionViolation
        If the structural precondition is not certified.
    MonotonicityViolation
        If the restricted minimum misses a strictly better action.
    """
    from .structure import check_theorem_conditions

    report = check_theorem_conditions(model.params, model.channels, "theorem2")
    if not report.passed:
        raise ConditionViolation(report)
    if verify not in ("final", "every"):
        raise ValueError("verify must be 'final' or 'every'")
    shape4 = model.space.shape
    threshold = stopping_threshold(tolerance, model.beta)
    V = np.zeros(model.space.n)
    count = 0
    residuals = []
    for n in range(1, max_iters + 1):
        Q = bellman_q(model, V)
        vmin, best, c = _restricted_sweep(Q.reshape(shape4 + (len(ACTIONS),)))
        count += c
        V_new = vmin.ravel()
        if verify == "every":
            _verify_restricted(model, Q, V_new)
        res = float(np.max(np.abs(V_new - V)))
        residuals.append(res)
        V = V_new
        if res < threshold:
            _verify_restricted(model, Q, V)
            policy = Policy(model.space, best.ravel())
            return MonotoneVIResult(V, policy, n, count, n * model.space.n * len(ACTIONS), residuals)
    raise ConvergenceError("monotone value iteration did not converge", residuals[-1])


def _verify_restricted(model, Q, v_restricted):
    gap = v_restricted - Q.min(axis=1)
    bad = np.flatnonzero(gap > TIE_TOL)
    if bad.size:
        state = model.space.state(int(bad[0]))
        raise MonotonicityViolation(
            f"restricted argmin misses a better action at state {tuple(state)} (gap {gap[bad[0]]:.3g})",
            state)
