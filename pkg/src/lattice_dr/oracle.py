"""Brute-force ground truth.

These routines deliberately avoid the solver's helpers: ideals are found by
filtering all bitmasks against the cover pairs, and costs are recomputed
from the raw weight vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded
from .functions import Instance
from .multilinear import eval_exact
from .poset import DEFAULT_IDEAL_CAP

MAX_BRUTE_BITS = 24


@dataclass(frozen=True)
class OracleResult:
    ideal: frozenset
    value: float
    feasible: int
    enumerated: int


def _ideal_masks(n, covers):
    masks = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(len(masks), dtype=bool)
    for p, q in covers:
        has_q = (masks >> q) & 1
        has_p = (masks >> p) & 1
        ok &= ~((has_q == 1) & (has_p == 0))
    return masks[ok]


def exact_opt(instance: Instance, cap: int = DEFAULT_IDEAL_CAP, tol: float = 1e-9) -> OracleResult:
    """Exhaustive maximum of f over feasible ideals (ties: fewest elements, then smallest bitmask)."""
    P = instance.poset
    n = P.n
    if n > MAX_BRUTE_BITS:
        raise CapExceeded(f"brute force over 2^{n} subsets is out of reach", count=None, cap=cap)
    masks = _ideal_masks(n, P.covers)
    if len(masks) > cap:
        raise CapExceeded(f"{len(masks)} ideals exceed cap {cap}", count=len(masks), cap=cap)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(float) if n else np.zeros((len(masks), 0))
    feas = np.ones(len(masks), dtype=bool)
    for c in instance.constraints:
        feas &= bits @ np.asarray(c.weights, float) <= c.budget + tol
    best, best_val, best_key = None, -np.inf, None
    for m, row in zip(masks[feas], bits[feas]):
        X = frozenset(np.flatnonzero(row).tolist())
        v = instance.objective(X)
        key = (len(X), int(m))
        if v > best_val or (v == best_val and key < best_key):
            best, best_val, best_key = X, v, key
    return OracleResult(best, float(best_val), int(feas.sum()), len(masks))


def grid_points(P, resolution: int):
    """Every member of the complex whose coordinates are multiples of 1/resolution."""
    levels = [i / resolution for i in range(resolution + 1)]
    order = list(P.topo)

    def rec(i, x):
        if i == len(order):
            yield x.copy()
            return
        p = order[i]
        allowed = levels if all(x[q] == 1.0 for q in P.preds[p]) else [0.0]
        for v in allowed:
            x[p] = v
            yield from rec(i + 1, x)
        x[p] = 0.0

    yield from rec(0, np.zeros(P.n))


def exact_multilinear_opt_on_grid(instance: Instance, resolution: int = 2, cap: int = DEFAULT_IDEAL_CAP,
                                  max_points: int = 200_000, tol: float = 1e-9):
    """Best continuous-feasible grid point under the exact multilinear extension."""
    P = instance.poset
    W = np.array([c.weights for c in instance.constraints], float).reshape(len(instance.constraints), P.n)
    b = np.array([c.budget for c in instance.constraints], float)
    best_x, best_v = None, -np.inf
    for i, x in enumerate(grid_points(P, resolution)):
        if i >= max_points:
            raise CapExceeded(f"more than {max_points} grid points", count=i, cap=max_points)
        if len(b) and np.any(W @ x > b + tol):
            continue
        v = eval_exact(instance.objective, P, x, cap)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, float(best_v)


def relabel(instance: Instance, perm) -> Instance:
    """Copy of the instance with element ``p`` renamed ``perm[p]``."""
    from .functions import CostFunction, ObjectiveOracle
    from .poset import build

    perm = list(perm)
    inv = np.argsort(perm)
    P = instance.poset
    covers = [(perm[p], perm[q]) for p, q in P.covers]
    names = [P.name(int(inv[i])) for i in range(P.n)]
    Q = build(P.n, covers, names)
    f = instance.objective
    g = ObjectiveOracle(lambda X: f(frozenset(int(inv[i]) for i in X)), {"family": "callable"})
    cons = [CostFunction(np.asarray(c.weights)[inv], c.budget, c.label) for c in instance.constraints]
    return Instance(Q, g, cons, validate=False)


def prefix_scan_chain(weights, costs, budget):
    """Best prefix of a chain for a modular objective (reference for chain instances)."""
    best, acc_w, acc_c = 0.0, 0.0, 0.0
    best_k = 0
    for k, (w, c) in enumerate(itertools.zip_longest(weights, costs), start=1):
        acc_w += w
        acc_c += c
        if acc_c <= budget + 1e-9 and acc_w > best:
            best, best_k = acc_w, k
    return best_k, best
