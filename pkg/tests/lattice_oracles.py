"""Independent brute-force oracles and random test functions for the lattice checkers."""
import itertools

import numpy as np

from nctwrc.structure import LatticeFunction

TOL = 1e-9


def midpoint_convex(f):
    """Discrete midpoint convexity; on a box this characterises L-natural convexity."""
    pts = [np.array(p) for p in f.points()]
    for x in pts:
        for y in pts:
            s = x + y
            hi, lo = -(-s // 2), s // 2
            if f(x) + f(y) - f(hi) - f(lo) < -TOL:
                return False
    return True


def hajek_multimodular(f):
    """Four-point inequalities over the base {-e1, e1-e2, ..., e_{n-1}-e_n, e_n}."""
    n = f.ndim
    E = np.eye(n, dtype=int)
    F = [-E[0]] + [E[k] - E[k + 1] for k in range(n - 1)] + [E[n - 1]]
    for x in f.points():
        x = np.array(x)
        for v, w in itertools.combinations(F, 2):
            vals = [f(x + v), f(x + w), f(x), f(x + v + w)]
            if np.all(np.isfinite(vals)) and vals[0] + vals[1] - vals[2] - vals[3] < -TOL:
                return False
    return True


def brute_submodular(f, i, j):
    n = f.ndim
    ei, ej = np.eye(n, dtype=int)[i], np.eye(n, dtype=int)[j]
    for x in f.points():
        x = np.array(x)
        vals = [f(x + ei), f(x + ej), f(x), f(x + ei + ej)]
        if np.all(np.isfinite(vals)) and vals[0] + vals[1] - vals[2] - vals[3] < -TOL:
            return False
    return True


def brute_lifted(f, lift, zeta_span=None):
    """Submodularity of a lifted function over a generous (x, z) window."""
    n = f.ndim
    span = zeta_span or (sum(f.shape) + 2)
    if lift == "lnatural":
        psi = lambda x, z: f(tuple(x[k] - z for k in range(n)))
        lo = [l - span for l in f.lower]
        hi = [u + span for u in f.upper]
    else:
        def psi(x, z):
            return f((x[0] - z,) + tuple(x[k] - x[k - 1] for k in range(1, n)))
        lo = list(np.cumsum(f.lower) - span)
        hi = list(np.cumsum(f.upper) + span)
    axes = n + 1
    for x in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
        for z in range(-span, span + 1):
            p = np.array(list(x) + [z])
            if not np.isfinite(psi(p[:n], p[n])) and not any(
                    np.isfinite(psi((p + e)[:n], (p + e)[n])) for e in np.eye(axes, dtype=int)):
                continue
            for i, j in itertools.combinations(range(axes), 2):
                ei, ej = np.eye(axes, dtype=int)[i], np.eye(axes, dtype=int)[j]
                pts = [p + ei, p + ej, p, p + ei + ej]
                vals = [psi(q[:n], q[n]) for q in pts]
                if np.all(np.isfinite(vals)) and vals[0] + vals[1] - vals[2] - vals[3] < -TOL:
                    return False
    return True


def random_lattice_function(rng, shape, lower=None):
    """Sum of convex quadratics of integer linear forms plus optional noise.

    The families are chosen so that L-natural, multimodular, both and neither
    all occur with reasonable frequency.
    """
    n = len(shape)
    pts = np.indices(shape).reshape(n, -1).T
    if lower is None:
        lower = tuple(int(v) for v in rng.integers(-2, 3, n))
    pts_abs = pts + np.asarray(lower)
    E = np.eye(n, dtype=int)
    kind = int(rng.integers(4))
    if kind == 0:  # L-natural generators
        forms = [E[i] for i in range(n)] + [E[i] - E[j] for i in range(n) for j in range(i + 1, n)]
    elif kind == 1:  # multimodular generators: consecutive partial sums
        forms = [E[:k].sum(axis=0) for k in range(1, n + 1)] + [E[k:].sum(axis=0) for k in range(1, n)]
    elif kind == 2:
        forms = [rng.integers(-1, 2, n) for _ in range(3)]
    else:
        forms = []
    v = np.zeros(len(pts))
    for fo in forms:
        v += rng.random() * 2 * ((pts_abs @ fo) - rng.integers(-1, 3)) ** 2
    noise = (0.0, 1e-3, 0.3, 3.0)[int(rng.integers(4))]
    v += noise * rng.standard_normal(len(pts))
    return LatticeFunction(v.reshape(shape), lower)
