"""Dense primal simplex for small packing LPs.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``, so the origin is
a feasible starting vertex.  Bland's rule rules out cycling.  The result
carries the dual solution, and :func:`certify` checks primal feasibility,
dual feasibility and a zero duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    y: np.ndarray
    value: float
    iterations: int


def maximize(c, A, b, tol: float = 1e-12, max_iter: int = 10_000) -> LpResult:
    c = np.asarray(c, float)
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float)
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("right-hand side must be non-negative")
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    it = 0
    while True:
        enter = next((j for j in range(n + m) if T[m, j] < -tol), None)
        if enter is None:
            break
        it += 1
        if it > max_iter:
            raise NoConvergence("simplex iteration limit reached")
        col = T[:m, enter]
        rows = np.flatnonzero(col > tol)
        if len(rows) == 0:
            raise NoConvergence("LP is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        T[leave] /= T[leave, enter]
        for i in range(m + 1):
            if i != leave and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[leave]
        basis[leave] = enter
    z = np.zeros(n + m)
    z[basis] = T[:m, -1]
    x = np.clip(z[:n], 0.0, None)
    y = np.clip(T[m, n:n + m], 0.0, None)
    return LpResult(x, y, float(c @ x), it)


def certify(c, A, b, res: LpResult, tol: float = 1e-9) -> float:
    """Largest violation among primal feasibility, dual feasibility and the duality gap."""
    c = np.asarray(c, float)
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float)
    scale = max(1.0, float(np.abs(c).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    primal = max(float((A @ res.x - b).max(initial=0.0)), float((-res.x).max(initial=0.0)))
    dual = float((c - A.T @ res.y).max(initial=0.0))
    gap = abs(float(b @ res.y) - res.value)
    return max(primal, dual, gap) / scale
