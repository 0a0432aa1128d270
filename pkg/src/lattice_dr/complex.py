"""Points of the median complex K(L) attached to a poset.

A point is a length-``n`` float vector.  It belongs to the complex when its
support is an ideal and every non-maximal support element sits at 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import OutOfBox
from .poset import Poset

SNAP = 1e-12


@dataclass(frozen=True)
class CubeId:
    antichain: frozenset
    base: frozenset

    @property
    def free(self) -> frozenset:
        return self.antichain


def snap(x, tol: float = SNAP) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[np.abs(x) <= tol] = 0.0
    x[np.abs(x - 1.0) <= tol] = 1.0
    return x


def _check_box(x, tol=SNAP):
    if np.any(x < -tol) or np.any(x > 1 + tol) or np.any(~np.isfinite(x)):
        raise OutOfBox(f"coordinates outside [0,1]: {x}")


def is_member(P: Poset, x) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (P.n,):
        raise ValueError(f"expected a vector of length {P.n}")
    _check_box(x)
    x = snap(x)
    for p, q in P.covers:
        if x[q] > 0 and x[p] < 1:
            return False
    return True


def ones(P: Poset, x) -> frozenset:
    x = snap(x)
    return frozenset(np.flatnonzero(x == 1.0).tolist())


def support(P: Poset, x) -> frozenset:
    x = snap(x)
    return frozenset(np.flatnonzero(x > 0).tolist())


def fractional(x) -> list[int]:
    x = snap(x)
    return np.flatnonzero((x > 0) & (x < 1)).tolist()


def cube_of(P: Poset, x) -> CubeId:
    """Cube spanned by the maximal elements of supp(x) plus all unlocked elements."""
    x = snap(x)
    cand = {p for p in range(P.n) if x[p] > 0}
    cand |= {p for p in range(P.n) if all(x[q] == 1.0 for q in P.preds[p])}
    anti = P.maximal(cand)
    base = set()
    for a in anti:
        base |= P.down(a)
    base -= anti
    return CubeId(frozenset(anti), frozenset(base))


def meet(x, y) -> np.ndarray:
    return np.minimum(np.asarray(x, float), np.asarray(y, float))


def join(x, y) -> np.ndarray:
    return np.maximum(np.asarray(x, float), np.asarray(y, float))


def integer_point(P: Poset, T: Iterable[int]) -> np.ndarray:
    x = np.zeros(P.n)
    x[list(T)] = 1.0
    return x


def bottom(P: Poset) -> np.ndarray:
    return np.zeros(P.n)


def top(P: Poset) -> np.ndarray:
    return np.ones(P.n)


def random_point(P: Poset, rng: np.random.Generator, p_frac: float = 0.6, p_one: float = 0.2) -> np.ndarray:
    """A random member: random ideal of ones, then random values on admissible elements.

    Values on the admissible antichain are fractional, 1, or 0 with the given
    probabilities, so both interior points and faces get exercised.
    """
    x = np.zeros(P.n)
    done = set()
    for p in P.topo:
        if all(q in done for q in P.preds[p]) and rng.random() < 0.5:
            done.add(p)
    x[list(done)] = 1.0
    for p in range(P.n):
        if p not in done and all(q in done for q in P.preds[p]):
            u = rng.random()
            if u < p_frac:
                x[p] = rng.uniform(0.05, 0.95)
            elif u < p_frac + p_one:
                x[p] = 1.0
    return x
