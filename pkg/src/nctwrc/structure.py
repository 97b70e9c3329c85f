"""Numerical checkers for lattice structure: monotone policies, submodularity,
L-natural convexity, multimodularity, stochastic dominance, and the parameter
conditions that certify them for the relay MDP.

Every checker returns a :class:`CheckReport`. Failing reports carry the first
violation found in lexicographic scan order, so repeated runs give the same
witness. Functions live on integer boxes; outside the box they are ``+inf``
and inequality instances touching ``+inf`` are skipped.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import ACTIONS, ModelParams, StateSpace

__all__ = [
    "INEQ_TOL",
    "PROB_TOL",
    "LatticeFunction",
    "Witness",
    "Clause",
    "CheckReport",
    "CheckerDisagreement",
    "STATE_AXES",
    "check_monotone_array",
    "check_monotone_policy",
    "check_submodular",
    "check_submodular_all",
    "check_lnatural",
    "check_multimodular",
    "check_multimodular_2d",
    "unimodular_matrix",
    "unimodular_transform",
    "check_stochastic_dominance",
    "check_theorem_conditions",
    "check_game_equilibria",
    "check_slices",
    "q_slice",
]

INEQ_TOL = 1e-9
PROB_TOL = 1e-12
MAX_LIFTED_POINTS = 100_000
STATE_AXES = ("b1", "b2", "g1", "g2")


class CheckerDisagreement(RuntimeError):
    """Two routes to the same verdict disagree; never resolved silently."""


@dataclass(frozen=True)
class LatticeFunction:
    """Real function on the integer box ``lower <= x <= lower + shape - 1``.

    ``values[x - lower]`` is ``f(x)``; entries may be ``+inf`` to mark points
    outside an effective domain. Evaluation outside the box returns ``+inf``.
    """

    values: np.ndarray
    lower: tuple = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 0 or v.size == 0:
            raise ValueError("lattice function needs a nonempty box")
        if np.any(np.isnan(v)) or np.any(v == -np.inf):
            raise ValueError("values must be real or +inf")
        lower = (0,) * v.ndim if self.lower is None else tuple(int(l) for l in self.lower)
        if len(lower) != v.ndim:
            raise ValueError("lower bound has wrong dimension")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lower", lower)

    @classmethod
    def from_callable(cls, fn: Callable, lower: Sequence[int], upper: Sequence[int]) -> "LatticeFunction":
        lower, upper = tuple(lower), tuple(upper)
        shape = tuple(u - l + 1 for l, u in zip(lower, upper))
        if min(shape) < 1:
            raise ValueError("empty box")
        vals = np.empty(shape)
        for idx in np.ndindex(*shape):
            vals[idx] = fn(tuple(i + l for i, l in zip(idx, lower)))
        return cls(vals, lower)

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def upper(self) -> tuple:
        return tuple(l + s - 1 for l, s in zip(self.lower, self.shape))

    def __call__(self, x) -> float:
        idx = tuple(int(xi) - l for xi, l in zip(x, self.lower))
        if len(idx) != self.ndim:
            raise ValueError("point has wrong dimension")
        if any(i < 0 or i >= s for i, s in zip(idx, self.shape)):
            return np.inf
        return float(self.values[idx])

    def points(self):
        for idx in np.ndindex(*self.shape):
            yield tuple(i + l for i, l in zip(idx, self.lower))


@dataclass(frozen=True)
class Witness:
    """A violated four-point inequality ``f(p1) + f(p2) - f(m1) - f(m2) >= 0``.

    Points are in the coordinates of ``domain`` (``"f"`` or ``"lifted"``);
    ``source`` maps lifted points back to arguments of the original function.
    """

    plus: tuple
    minus: tuple
    values: tuple
    margin: float
    domain: str = "f"
    source: tuple = ()


@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    margin: float = float("nan")
    detail: str = ""


@dataclass
class CheckReport:
    check: str
    passed: bool
    witness: object = None
    axes: tuple = ()
    magnitude: float = 0.0
    note: str = ""
    clauses: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.passed)

    def to_text(self) -> str:
        lines = [f"{self.check}: {'PASS' if self.passed else 'FAIL'}"]
        if self.axes:
            lines.append(f"  axes: {tuple(self.axes)}")
        if not self.passed and self.witness is not None:
            lines.append(f"  witness: {_fmt_witness(self.witness)}")
            lines.append(f"  magnitude: {self.magnitude:.6g}")
        for c in self.clauses:
            m = "" if np.isnan(c.margin) else f" margin={c.margin:.6g}"
            d = f" ({c.detail})" if c.detail else ""
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}{m}{d}")
        if self.note:
            lines.append(f"  note: {self.note}")
        return "\n".join(lines)


def _fmt_witness(w) -> str:
    if isinstance(w, Witness):
        s = f"plus={w.plus} minus={w.minus} margin={w.margin:.6g}"
        if w.source:
            s += f" source={w.source}"
        return s
    return str(w)


# --------------------------------------------------------------------------
# four-point inequality engine

def _quad_scan(values: np.ndarray, plus, minus, tol: float, strict: bool):
    """Scan ``v[x+p1] + v[x+p2] - v[x+m1] - v[x+m2]`` over all valid bases.

    Returns ``(base_index, margin)`` of the first violation in C order, or
    ``None``. Instances with any infinite term are skipped.
    """
    offs = [np.asarray(o, dtype=int) for o in (*plus, *minus)]
    lo = np.min(offs, axis=0)
    hi = np.max(offs, axis=0)
    shape = np.asarray(values.shape)
    start = -lo
    stop = shape - hi
    if np.any(stop <= start):
        return None

    def sl(o):
        return values[tuple(slice(s + oi, e + oi) for s, e, oi in zip(start, stop, o))]

    t = [sl(o) for o in offs]
    finite = np.isfinite(t[0]) & np.isfinite(t[1]) & np.isfinite(t[2]) & np.isfinite(t[3])
    with np.errstate(invalid="ignore"):
        margin = (t[0] + t[1]) - (t[2] + t[3])
    bad = finite & ((margin <= tol) if strict else (margin < -tol))
    if not bad.any():
        return None
    k = np.unravel_index(int(np.argmax(bad)), bad.shape)
    base = tuple(int(s + ki) for s, ki in zip(start, k))
    return base, float(margin[k])


def _unit(n, i):
    e = np.zeros(n, dtype=int)
    e[i] = 1
    return e


def _scan_pairs(values, pairs_offsets, tol, strict):
    """Run several quadruple families; earliest base (then family order) wins."""
    best = None
    for key, (plus, minus) in pairs_offsets:
        hit = _quad_scan(values, plus, minus, tol, strict)
        if hit is None:
            continue
        if best is None or hit[0] < best[1][0]:
            best = (key, hit, plus, minus)
    return best


def _make_witness(values, lower, hit, plus, minus, domain="f", source_fn=None):
    base, margin = hit
    b = np.asarray(base)
    to_pt = lambda o: tuple(int(v) for v in b + np.asarray(o) + np.asarray(lower))
    P = tuple(to_pt(o) for o in plus)
    M = tuple(to_pt(o) for o in minus)
    vals = tuple(float(values[tuple(b + np.asarray(o))]) for o in (*plus, *minus))
    source = tuple(source_fn(p) for p in (*P, *M)) if source_fn else ()
    return Witness(P, M, vals, margin, domain, source)


def _submodular_families(n, axis_pairs):
    fams = []
    zero = np.zeros(n, dtype=int)
    for i, j in axis_pairs:
        ei, ej = _unit(n, i), _unit(n, j)
        fams.append(((i, j), ((ei, ej), (zero, ei + ej))))
    return fams


# --------------------------------------------------------------------------
# monotonicity

def check_monotone_array(values: np.ndarray, axes: Sequence[int], decreasing: bool = False,
                         names: Sequence[str] | None = None, check: str = "monotone",
                         offset: Sequence[int] | None = None) -> CheckReport:
    """Pass iff ``values`` is nondecreasing (or nonincreasing) along each axis.

    On a box, monotonicity along every chain in the product order is the same
    as monotonicity along each axis separately. Witness is
    ``(lower_point, upper_point)`` for the first drop in lexicographic order.
    """
    values = np.asarray(values)
    offset = np.zeros(values.ndim, dtype=int) if offset is None else np.asarray(offset)
    best = None
    for ax in axes:
        if values.shape[ax] < 2:
            continue
        d = np.diff(values.astype(float), axis=ax)
        bad = d > INEQ_TOL if decreasing else d < -INEQ_TOL
        if not bad.any():
            continue
        k = np.unravel_index(int(np.argmax(bad)), bad.shape)
        if best is None or k < best[1]:
            best = (ax, k, float(abs(d[k])))
    label = tuple(names[a] for a in axes) if names else tuple(axes)
    if best is None:
        return CheckReport(check, True, axes=label)
    ax, k, mag = best
    lo = tuple(int(v) for v in np.asarray(k) + offset)
    hi = list(lo)
    hi[ax] += 1
    return CheckReport(check, False, witness=(lo, tuple(hi)), axes=label, magnitude=mag,
                       note=f"drop along {names[ax] if names else ax}")


def check_monotone_policy(policy, axes: Sequence[str] = ("b1",), components: Sequence[int] = (1,)) -> CheckReport:
    """Pass iff the chosen action components are nondecreasing along ``axes``
    with all other state coordinates held fixed.

    ``axes`` are names from ``("b1", "b2", "g1", "g2")``; ``components`` picks
    ``a1`` and/or ``a2``. Witness states use 1-based channel indices.
    """
    ax_idx = []
    for a in axes:
        if a not in STATE_AXES:
            raise ValueError(f"unknown axis {a!r}; expected one of {STATE_AXES}")
        ax_idx.append(STATE_AXES.index(a))
    label = "a" + "".join(str(c) for c in components) + " vs (" + ",".join(axes) + ")"
    for c in components:
        if c not in (1, 2):
            raise ValueError("components must be 1 and/or 2")
        rep = check_monotone_array(policy.component(c), ax_idx, names=STATE_AXES,
                                   check=f"monotone {label}", offset=(0, 0, 1, 1))
        if not rep.passed:
            rep.note = f"a{c} decreases ({rep.note})"
            rep.axes = tuple(axes)
            return rep
    return CheckReport(f"monotone {label}", True, axes=tuple(axes))


# --------------------------------------------------------------------------
# submodularity and discrete convexity

def check_submodular(f: LatticeFunction, axis_i: int, axis_j: int, strict: bool = False,
                     tol: float = INEQ_TOL) -> CheckReport:
    """``f(x+e_i) + f(x+e_j) >= f(x) + f(x+e_i+e_j)`` for all ``x``.

    With ``strict=True`` every instance must hold with slack above ``tol``.
    """
    if axis_i == axis_j:
        raise ValueError("axes must differ")
    if f.shape[axis_i] < 2 or f.shape[axis_j] < 2:
        raise ValueError("both axes need length >= 2")
    name = "strict submodular" if strict else "submodular"
    return _submodular_report(f, [(axis_i, axis_j)], name, strict, tol)


def check_submodular_all(f: LatticeFunction, strict: bool = False, tol: float = INEQ_TOL) -> CheckReport:
    """Submodularity in every axis pair."""
    pairs = list(itertools.combinations(range(f.ndim), 2))
    return _submodular_report(f, pairs, "submodular", strict, tol)


def _submodular_report(f, pairs, name, strict, tol, domain="f", source_fn=None, lower=None):
    lower = f.lower if lower is None else lower
    best = _scan_pairs(f.values, _submodular_families(f.ndim, pairs), tol, strict)
    axes = tuple(pairs[0]) if len(pairs) == 1 else ()
    if best is None:
        return CheckReport(name, True, axes=axes)
    key, hit, plus, minus = best
    w = _make_witness(f.values, lower, hit, plus, minus, domain, source_fn)
    return CheckReport(name, False, witness=w, axes=key, magnitude=abs(hit[1]))


def _lift_lnatural(f: LatticeFunction):
    """``psi(x, z) = f(x - z*1)`` on ``x in [lower, upper+1]``, ``z in {0, 1}``.

    ``psi`` is invariant under ``(x, z) -> (x + c*1, z + c)`` so two layers of
    ``z`` capture every inequality instance with finite terms.
    """
    n = f.ndim
    shape = tuple(s + 1 for s in f.shape) + (2,)
    psi = np.full(shape, np.inf)
    core = tuple(slice(0, s) for s in f.shape)
    psi[core + (0,)] = f.values
    psi[tuple(slice(1, s + 1) for s in f.shape) + (1,)] = f.values
    lower = tuple(f.lower) + (0,)

    def source(p):
        return tuple(p[k] - p[n] for k in range(n))
    return psi, lower, source


def _lift_multimodular(f: LatticeFunction):
    """``psi(x, z) = f(x1 - z, x2 - x1, ..., xn - x_{n-1})``.

    ``x_k`` ranges over ``[sum(l[:k]), sum(u[:k]) + 1]`` and ``z`` over ``{0, 1}``.
    """
    n = f.ndim
    lo = np.cumsum(f.lower)
    hi = np.cumsum(f.upper) + 1
    shape = tuple(int(h - l + 1) for l, h in zip(lo, hi)) + (2,)
    psi = np.full(shape, np.inf)
    for z in (0, 1):
        for y in f.points():
            x = np.cumsum(y)
            x = x + z
            psi[tuple(int(v) for v in x - lo) + (z,)] = f(y)
    lower = tuple(int(v) for v in lo) + (0,)

    def source(p):
        x, z = p[:n], p[n]
        return (x[0] - z,) + tuple(x[k] - x[k - 1] for k in range(1, n))
    return psi, lower, source


def _lifted_size(f):
    return 2 * int(np.prod([s + 1 for s in f.shape]))


def check_lnatural(f: LatticeFunction, tol: float = INEQ_TOL, max_points: int = MAX_LIFTED_POINTS) -> CheckReport:
    """L-natural convexity: ``f(x - z*1)`` submodular in ``(x, z)``.

    Boxes whose lifted grid exceeds ``max_points`` are checked on every
    two-axis slice instead, and the report says so.
    """
    if f.ndim > 2 and _lifted_size(f) > max_points:
        return _pairwise_fallback(f, check_lnatural, "L-natural")
    psi, lower, source = _lift_lnatural(f)
    lifted = LatticeFunction(psi, lower)
    pairs = list(itertools.combinations(range(lifted.ndim), 2))
    rep = _submodular_report(lifted, pairs, "L-natural", False, tol, "lifted", source)
    return rep


def check_multimodular(f: LatticeFunction, tol: float = INEQ_TOL, max_points: int = MAX_LIFTED_POINTS,
                       cross_check: bool = True) -> CheckReport:
    """Multimodularity via the lifted submodularity definition.

    For two-dimensional ``f`` the verdict is cross-checked against the
    supermodular-plus-superconvex criterion unless ``cross_check`` is off; a
    mismatch raises :class:`CheckerDisagreement`.
    """
    if f.ndim > 2 and _multimodular_lifted_size(f) > max_points:
        return _pairwise_fallback(f, check_multimodular, "multimodular")
    psi, lower, source = _lift_multimodular(f)
    lifted = LatticeFunction(psi, lower)
    pairs = list(itertools.combinations(range(lifted.ndim), 2))
    rep = _submodular_report(lifted, pairs, "multimodular", False, tol, "lifted", source)
    if f.ndim == 2 and cross_check:
        other = check_multimodular_2d(f, tol)
        if other.passed != rep.passed:
            raise CheckerDisagreement(
                f"lifted definition says {rep.passed}, 2-D criterion says {other.passed}:\n"
                f"{rep.to_text()}\n{other.to_text()}")
        rep.note = "agrees with supermodular + superconvex criterion"
    return rep


def _multimodular_lifted_size(f):
    return 2 * int(np.prod(np.cumsum(f.upper) - np.cumsum(f.lower) + 2))


def check_multimodular_2d(f: LatticeFunction, tol: float = INEQ_TOL) -> CheckReport:
    """Two-dimensional multimodularity as supermodular plus superconvex.

    Supermodular: ``f(x+e1+e2) - f(x+e1) - f(x+e2) + f(x) >= 0``.
    Superconvex: ``f(x+e_i) - f(x) - f(x+e_j) + f(x+e_j-e_i) >= 0`` for
    ``i != j``.
    """
    if f.ndim != 2:
        raise ValueError("criterion is two-dimensional")
    e1, e2, z = np.array([1, 0]), np.array([0, 1]), np.array([0, 0])
    fams = [
        ("supermodular", ((e1 + e2, z), (e1, e2))),
        ("superconvex 1,2", ((e1, e2 - e1), (z, e2))),
        ("superconvex 2,1", ((e2, e1 - e2), (z, e1))),
    ]
    best = _scan_pairs(f.values, fams, tol, False)
    if best is None:
        return CheckReport("multimodular (2-D criterion)", True)
    key, hit, plus, minus = best
    w = _make_witness(f.values, f.lower, hit, plus, minus)
    return CheckReport("multimodular (2-D criterion)", False, witness=w, magnitude=abs(hit[1]), note=key)


def _pairwise_fallback(f, checker, name):
    for i, j in itertools.combinations(range(f.ndim), 2):
        others = [k for k in range(f.ndim) if k not in (i, j)]
        for fixed in itertools.product(*[range(f.shape[k]) for k in others]):
            idx = [slice(None)] * f.ndim
            for k, v in zip(others, fixed):
                idx[k] = v
            sub = LatticeFunction(f.values[tuple(idx)], (f.lower[i], f.lower[j]))
            rep = checker(sub)
            if not rep.passed:
                rep.check = name
                rep.axes = (i, j)
                rep.note = (f"two-axis slices only (lifted grid too large); "
                            f"failing slice fixes axes {others} at {tuple(v + f.lower[k] for k, v in zip(others, fixed))}")
                return rep
    return CheckReport(name, True, note="two-axis slices only (lifted grid too large)")


# --------------------------------------------------------------------------
# unimodular coordinate changes

def unimodular_matrix(n: int, i: int) -> np.ndarray:
    """``M_{n,i} = blockdiag(-U_i, L_{n-i})`` with ``U``/``L`` all-ones
    upper/lower triangular blocks."""
    if not 1 <= i <= n:
        raise ValueError("need 1 <= i <= n")
    M = np.zeros((n, n), dtype=int)
    M[:i, :i] = -np.triu(np.ones((i, i), dtype=int))
    M[i:, i:] = np.tril(np.ones((n - i, n - i), dtype=int))
    return M


def unimodular_transform(f: LatticeFunction, n: int, i: int, sign: int = 1,
                         inverse: bool = True) -> LatticeFunction:
    """Compose ``f`` with ``T = sign * M_{n,i}^{-1}`` (or ``sign * M_{n,i}``).

    Returns ``h(x) = f(T x)`` on the bounding box of ``{x : T x in box(f)}``,
    with ``+inf`` where ``T x`` leaves the box. Applying the transform with the
    opposite ``inverse`` flag undoes it.
    """
    if f.ndim != n:
        raise ValueError("dimension mismatch")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    M = unimodular_matrix(n, i)
    Minv = np.rint(np.linalg.inv(M)).astype(int)
    T = sign * (Minv if inverse else M)
    Tinv = sign * (M if inverse else Minv)
    pts = np.array(list(f.points()), dtype=int)
    img = pts @ Tinv.T
    lo = img.min(axis=0)
    hi = img.max(axis=0)
    vals = np.full(tuple(hi - lo + 1), np.inf)
    for x, y in zip(img, pts):
        vals[tuple(x - lo)] = f(y)
    if not np.isfinite(vals).any():
        raise ValueError("transformed box is empty")
    assert np.array_equal(img @ T.T, pts)
    return LatticeFunction(vals, tuple(int(v) for v in lo))


# --------------------------------------------------------------------------
# stochastic dominance

def check_stochastic_dominance(P, tol: float = PROB_TOL) -> CheckReport:
    """First-order stochastic monotonicity of the rows of ``P``.

    Row ``g+1`` must dominate row ``g``: every upper-tail sum
    ``sum_{j >= m} P[g+1, j] >= sum_{j >= m} P[g, j]``. Witness ``(g, m)`` is
    1-based.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < -tol) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("matrix is not row-stochastic")
    tails = np.cumsum(P[:, ::-1], axis=1)[:, ::-1]
    d = tails[1:] - tails[:-1]
    bad = d < -tol
    if not bad.any():
        return CheckReport("stochastic dominance", True)
    g, m = np.unravel_index(int(np.argmax(bad)), bad.shape)
    return CheckReport("stochastic dominance", False, witness=(int(g) + 1, int(m) + 1),
                       magnitude=float(-d[g, m]),
                       note=f"tail from state {m + 1}: row {g + 2} has {tails[g + 1, m]:.6g} < row {g + 1} {tails[g, m]:.6g}")


# --------------------------------------------------------------------------
# parameter conditions

def _overflow_clause(params: ModelParams) -> Clause:
    bound = 2 * params.lambda_hold + params.eta_err + params.tau_tx
    margin = params.xi_overflow - bound
    return Clause("(a) xi_overflow >= 2*lambda + eta + tau", margin >= -INEQ_TOL, margin,
                  f"{params.xi_overflow:g} vs {bound:g}")


def discount_channel_ratios(channel) -> np.ndarray:
    """Per-state ratio ``d_g / (P d)_g`` with ``d_g = Pe(g) - Pe(g+1)``."""
    pe = np.asarray(channel.error_prob_ext)
    d = pe[:-1] - pe[1:]
    denom = np.asarray(channel.transition) @ d
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, d / denom, np.inf)


def check_theorem_conditions(params: ModelParams, channels=None, theorem_id: str = "theorem2") -> CheckReport:
    """Evaluate the sufficient conditions for monotone optimal policies.

    ``theorem2``: overflow cost bound.
    ``corollary1``: overflow bound, ``p1 = p2 = 0.5`` and
    ``beta <= 2 (tau - lambda) / (tau + eta)``.
    ``theorem4``: overflow bound; on both channels ``Pe`` nonincreasing,
    stochastically monotone transitions, and for every state ``g``
    ``beta <= d_g / sum_g' P[g, g'] d_g'`` with ``d_g = Pe(g) - Pe(g+1)``.
    """
    tid = theorem_id.lower().replace("_", "").replace(" ", "")
    clauses = [_overflow_clause(params)]
    if tid == "theorem2":
        pass
    elif tid == "corollary1":
        eq = max(abs(params.p1 - 0.5), abs(params.p2 - 0.5))
        clauses.append(Clause("(b) p1 = p2 = 0.5", eq <= PROB_TOL, -eq, f"p=({params.p1:g},{params.p2:g})"))
        bound = 2 * (params.tau_tx - params.lambda_hold) / (params.tau_tx + params.eta_err)
        margin = bound - params.beta
        clauses.append(Clause("(c) beta <= 2(tau - lambda)/(tau + eta)", margin >= -INEQ_TOL, margin,
                              f"beta={params.beta:g}, bound={bound:.6g}"))
    elif tid == "theorem4":
        if channels is None:
            raise ValueError("theorem4 needs built channels")
        for ci, ch in enumerate(channels, start=1):
            pe = np.asarray(ch.error_prob_ext)
            drops = pe[:-2] - pe[1:-1]
            mb = float(drops.min()) if drops.size else 0.0
            clauses.append(Clause(f"(b) channel {ci}: Pe nonincreasing", mb >= -PROB_TOL, mb))
            dom = check_stochastic_dominance(ch.transition)
            clauses.append(Clause(f"(c) channel {ci}: stochastically monotone rows", dom.passed,
                                  -dom.magnitude, "" if dom.passed else f"witness (g,m)={dom.witness}"))
            ratios = discount_channel_ratios(ch)
            for g, r in enumerate(ratios, start=1):
                margin = float(r - params.beta)
                clauses.append(Clause(f"(d) channel {ci}, g={g}: beta <= ratio", margin >= -INEQ_TOL, margin,
                                      f"ratio={r:.6g}"))
    else:
        raise ValueError(f"unknown theorem_id {theorem_id!r}")
    passed = all(c.passed for c in clauses)
    failing = [c.name for c in clauses if not c.passed]
    return CheckReport(f"conditions {theorem_id}", passed, clauses=clauses,
                       witness=failing[0] if failing else None,
                       magnitude=max((-c.margin for c in clauses if not c.passed), default=0.0))


# --------------------------------------------------------------------------
# one-stage coordination game

def _game_scope_mask(space: StateSpace, scope: str) -> np.ndarray:
    B1, B2 = np.meshgrid(np.arange(space.L1 + 2), np.arange(space.L2 + 2), indexing="ij")
    if scope == "literal":
        m = (B1 < space.L1 + 1) & (B2 < space.L2 + 1)
    elif scope == "interior":
        m = (B1 >= 1) & (B1 <= space.L1) & (B2 >= 1) & (B2 <= space.L2)
    elif scope == "all":
        m = np.ones_like(B1, dtype=bool)
    else:
        raise ValueError("scope must be 'literal', 'interior' or 'all'")
    return np.broadcast_to(m[:, :, None, None], space.shape).ravel()


def pure_equilibria(q4, tol: float = INEQ_TOL) -> list:
    """Pure Nash equilibria of the common-cost game with costs ``q4[a1, a2]``."""
    q4 = np.asarray(q4, dtype=float).reshape(2, 2)
    eq = []
    for a1, a2 in ACTIONS:
        if q4[a1, a2] <= q4[1 - a1, a2] + tol and q4[a1, a2] <= q4[a1, 1 - a2] + tol:
            eq.append((a1, a2))
    return eq


def check_game_equilibria(q, space: StateSpace | None = None, scope: str = "literal",
                          tol: float = INEQ_TOL) -> CheckReport:
    """Coordination-game structure of ``Q`` in the action pair.

    ``q`` is either one ``2x2`` table ``q[a1, a2]`` or an ``(n, 4)`` Q-table over
    ``space``. Clause 1: ``Q10 + Q01 - Q00 - Q11 > 0`` at every state (strict
    supermodularity of ``-Q``). Clause 2: ``(0,0)`` and ``(1,1)`` are both
    pure equilibria on the states in ``scope``: ``"literal"`` means
    ``b_i < L_i + 1``, ``"interior"`` means ``1 <= b_i <= L_i``.
    """
    q = np.asarray(q, dtype=float)
    if q.shape == (2, 2):
        tables = q.reshape(1, 4)
        states = [None]
        mask = np.ones(1, dtype=bool)
    else:
        if space is None or q.shape != (space.n, 4):
            raise ValueError("expected a 2x2 table or an (n, 4) table with its state space")
        tables = q
        states = None
        mask = _game_scope_mask(space, scope)
    gap = tables[:, 2] + tables[:, 1] - tables[:, 0] - tables[:, 3]
    clauses = []
    bad = np.flatnonzero(gap <= tol)
    sm_margin = float(gap.min())
    clauses.append(Clause("strictly supermodular -Q in (a1, a2)", bad.size == 0, sm_margin))
    witness = None
    if bad.size:
        witness = ("supermodularity", _state_of(space, states, int(bad[0])))
    eq_fail = None
    for k in np.flatnonzero(mask):
        eqs = pure_equilibria(tables[k].reshape(2, 2), tol)
        if (0, 0) not in eqs or (1, 1) not in eqs:
            eq_fail = (int(k), eqs)
            break
    scope_name = "single state" if states is not None else scope
    clauses.append(Clause(f"(0,0) and (1,1) are equilibria [{scope_name}]", eq_fail is None,
                          detail="" if eq_fail is None else
                          f"state {_state_of(space, states, eq_fail[0])} has equilibria {eq_fail[1]}"))
    if witness is None and eq_fail is not None:
        witness = ("equilibria", _state_of(space, states, eq_fail[0]), tuple(eq_fail[1]))
    passed = all(c.passed for c in clauses)
    return CheckReport("one-stage game", passed, witness=witness, magnitude=max(0.0, -sm_margin),
                       clauses=clauses)


def _state_of(space, states, k):
    if states is not None:
        return ()
    return tuple(space.state(k))


# --------------------------------------------------------------------------
# slices of value and Q functions

def q_slice(q_grid: np.ndarray, i: int, fixed: tuple) -> LatticeFunction:
    """``Q`` restricted to ``(b_i, a_i)`` with ``fixed = (b_{-i}, g1, g2, a_{-i})``
    (0-based channel indices). ``q_grid`` has shape ``(B1, B2, K1, K2, 2, 2)``."""
    b_o, g1, g2, a_o = fixed
    if i == 1:
        vals = q_grid[:, b_o, g1, g2, :, a_o]
    else:
        vals = q_grid[b_o, :, g1, g2, a_o, :]
    return LatticeFunction(vals, (0, 0))


def check_slices(grid: np.ndarray, vary: Sequence[int], checker: Callable, name: str | None = None) -> CheckReport:
    """Apply ``checker`` to every slice of ``grid`` spanned by axes ``vary``,
    all other axes fixed. First failing slice (lexicographic) is reported with
    its fixed coordinates (0-based array indices)."""
    grid = np.asarray(grid, dtype=float)
    others = [k for k in range(grid.ndim) if k not in vary]
    count = 0
    for fixed in itertools.product(*[range(grid.shape[k]) for k in others]):
        idx = [slice(None)] * grid.ndim
        for k, v in zip(others, fixed):
            idx[k] = v
        sub = grid[tuple(idx)]
        order = sorted(vary)
        sub = np.transpose(sub, [order.index(v) for v in vary])
        rep = checker(LatticeFunction(sub))
        count += 1
        if not rep.passed:
            rep.check = name or rep.check
            rep.note = (rep.note + "; " if rep.note else "") + f"slice fixes axes {tuple(others)} at {fixed}"
            return rep
    return CheckReport(name or getattr(checker, "__name__", "slices"), True,
                       axes=tuple(vary), note=f"{count} slices")
