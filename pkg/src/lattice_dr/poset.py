"""Finite posets given by cover relations, and their ideals.

Elements are the integers ``0..n-1``.  Ideals and antichains are plain
``frozenset`` objects; the :class:`Poset` methods validate them where it
matters.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, CycleDetected, NotReduced, PosetError

Ideal = frozenset
Antichain = frozenset

DEFAULT_IDEAL_CAP = 1 << 20


@dataclass(frozen=True, eq=False)
class Poset:
    """Immutable finite poset.

    ``covers`` holds pairs ``(p, q)`` meaning ``p`` is covered by ``q``.
    ``leq[p, q]`` is the reflexive-transitive closure.
    """

    n: int
    covers: tuple[tuple[int, int], ...]
    names: tuple[str, ...] | None = None
    leq: np.ndarray = field(init=False, repr=False)
    preds: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    succs: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    topo: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n
        if n < 0:
            raise PosetError("element count must be non-negative")
        seen = set()
        preds = [[] for _ in range(n)]
        succs = [[] for _ in range(n)]
        for p, q in self.covers:
            if not (0 <= p < n and 0 <= q < n):
                raise PosetError(f"cover pair ({p}, {q}) out of range for n={n}")
            if p == q:
                raise CycleDetected(f"self-loop on element {p}")
            if (p, q) in seen:
                raise PosetError(f"duplicate cover pair ({p}, {q})")
            seen.add((p, q))
            preds[q].append(p)
            succs[p].append(q)
        if self.names is not None and len(self.names) != n:
            raise PosetError("names must have one entry per element")

        # Kahn's algorithm with an index-ordered heap gives a stable linear extension.
        indeg = [len(pr) for pr in preds]
        heap = [p for p in range(n) if indeg[p] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            p = heapq.heappop(heap)
            order.append(p)
            for q in sorted(succs[p]):
                indeg[q] -= 1
                if indeg[q] == 0:
                    heapq.heappush(heap, q)
        if len(order) != n:
            stuck = sorted(p for p in range(n) if indeg[p] > 0)
            raise CycleDetected(f"cover digraph has a cycle through elements {stuck}")

        leq = np.eye(n, dtype=bool)
        for q in order:
            for p in preds[q]:
                leq[:, q] |= leq[:, p]
        for p, q in self.covers:
            # p < r < q for some r means (p, q) is implied transitively
            between = leq[p, :] & leq[:, q]
            between[p] = between[q] = False
            if between.any():
                r = int(np.flatnonzero(between)[0])
                raise NotReduced(f"cover ({p}, {q}) is implied via element {r}")
        leq.setflags(write=False)

        object.__setattr__(self, "covers", tuple((int(p), int(q)) for p, q in self.covers))
        object.__setattr__(self, "leq", leq)
        object.__setattr__(self, "preds", tuple(tuple(sorted(pr)) for pr in preds))
        object.__setattr__(self, "succs", tuple(tuple(sorted(sc)) for sc in succs))
        object.__setattr__(self, "topo", tuple(order))

    @property
    def elements(self) -> range:
        return range(self.n)

    def name(self, p: int) -> str:
        return self.names[p] if self.names is not None else f"p{p}"

    def le(self, p: int, q: int) -> bool:
        return bool(self.leq[p, q])

    def lt(self, p: int, q: int) -> bool:
        return p != q and bool(self.leq[p, q])

    def down(self, p: int) -> frozenset:
        return frozenset(np.flatnonzero(self.leq[:, p]).tolist())

    def up(self, p: int) -> frozenset:
        return frozenset(np.flatnonzero(self.leq[p, :]).tolist())

    def minimal(self, subset: Iterable[int]) -> frozenset:
        s = set(subset)
        return frozenset(p for p in s if not any(q != p and self.leq[q, p] for q in s))

    def maximal(self, subset: Iterable[int]) -> frozenset:
        s = set(subset)
        return frozenset(p for p in s if not any(q != p and self.leq[p, q] for q in s))

    def is_antichain(self, subset: Iterable[int]) -> bool:
        s = list(subset)
        return all(not self.leq[a, b] for a in s for b in s if a != b)

    def induced(self, keep: Sequence[int]) -> "Poset":
        """Subposet on ``keep`` (relabelled ``0..len(keep)-1`` in the given order)."""
        keep = list(keep)
        idx = {p: i for i, p in enumerate(keep)}
        covers = []
        for a in keep:
            for b in keep:
                if a != b and self.leq[a, b]:
                    if not any(c not in (a, b) and self.leq[a, c] and self.leq[c, b] for c in keep):
                        covers.append((idx[a], idx[b]))
        names = tuple(self.name(p) for p in keep)
        return Poset(len(keep), tuple(covers), names)

    def __repr__(self):
        return f"Poset(n={self.n}, covers={list(self.covers)})"


def build(n: int, covers: Iterable[tuple[int, int]], names: Sequence[str] | None = None) -> Poset:
    return Poset(n, tuple(tuple(c) for c in covers), tuple(names) if names is not None else None)


def chain(k: int) -> Poset:
    return build(k, [(i, i + 1) for i in range(k - 1)])


def antichain(k: int) -> Poset:
    return build(k, [])


def is_ideal(P: Poset, subset: Iterable[int]) -> bool:
    s = set(subset)
    return all(p in s for q in s for p in P.preds[q])


def principal_ideal(P: Poset, p: int) -> frozenset:
    return P.down(p)


def ideal_generated(P: Poset, gens: Iterable[int]) -> frozenset:
    """Union of principal ideals of ``gens``."""
    out = set()
    for p in gens:
        out |= P.down(p)
    return frozenset(out)


def admissible(P: Poset, X: Iterable[int]) -> frozenset:
    """Minimal elements of the complement of the ideal ``X``."""
    X = set(X)
    return frozenset(p for p in range(P.n) if p not in X and all(q in X for q in P.preds[p]))


def topological_order(P: Poset) -> list[int]:
    return list(P.topo)


def count_ideals(P: Poset, cap: int | None = None) -> int:
    """Count ideals, stopping early once ``cap`` is exceeded."""
    return len(_ideal_masks(P, cap, raise_on_cap=False))


def _ideal_masks(P: Poset, cap, raise_on_cap=True):
    order = P.topo
    pred_mask = [0] * P.n
    for q in range(P.n):
        for p in P.preds[q]:
            pred_mask[q] |= 1 << p
    out = []
    limit = cap if cap is not None else float("inf")

    # Each element in topological order is either excluded, or included when
    # all of its lower covers already are; every leaf is a distinct ideal.
    stack = [(0, 0)]
    while stack:
        i, mask = stack.pop()
        if i == len(order):
            out.append(mask)
            if len(out) > limit:
                if raise_on_cap:
                    raise CapExceeded(f"more than {cap} ideals", count=len(out), cap=cap)
                return out
            continue
        p = order[i]
        stack.append((i + 1, mask))
        if pred_mask[p] & mask == pred_mask[p]:
            stack.append((i + 1, mask | (1 << p)))
    return out


def enumerate_ideals(P: Poset, cap: int | None = DEFAULT_IDEAL_CAP) -> list[frozenset]:
    """All ideals of ``P``, subsets before supersets, deterministic order."""
    masks = _ideal_masks(P, cap)
    masks.sort(key=lambda m: (m.bit_count() if hasattr(m, "bit_count") else bin(m).count("1"), m))
    return [mask_to_set(m) for m in masks]


def mask_to_set(mask: int) -> frozenset:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def set_to_mask(s: Iterable[int]) -> int:
    m = 0
    for p in s:
        m |= 1 << p
    return m
