"""Seeded generators of validated instances.

Objectives are built so that DR-submodularity holds by construction, and
every instance still passes through the brute-force validators.
"""

from __future__ import annotations

import networkx as nx
import numpy as np

from . import rng as rngmod
from .errors import ValidationFailed
from .functions import CostFunction, Instance, make_concave_modular, make_coverage, make_modular
from .poset import Poset, build, chain, antichain

FAMILIES = ("chain", "antichain", "forest", "layered", "sensor")
OBJECTIVES = ("coverage", "concave", "modular")


def random_poset(family: str, n: int, gen: np.random.Generator, density: float = 0.35) -> Poset:
    if family == "chain":
        return chain(n)
    if family == "antichain":
        return antichain(n)
    if family == "forest":
        covers = []
        for i in range(1, n):
            if gen.random() < 0.7:
                covers.append((int(gen.integers(i)), i))
        return build(n, covers)
    if family == "layered":
        layers = max(2, int(round(np.sqrt(n))))
        cuts = np.sort(gen.choice(np.arange(1, n), size=min(layers - 1, n - 1), replace=False)) if n > 1 else []
        bounds = [0, *cuts.tolist(), n] if n > 1 else [0, n]
        covers = []
        for a, b, c in zip(bounds, bounds[1:], bounds[2:]):
            for q in range(b, c):
                for p in range(a, b):
                    if gen.random() < 0.5:
                        covers.append((p, q))
        return build(n, covers)
    if family in ("sensor", "dag"):
        G = nx.DiGraph()
        G.add_nodes_from(range(n))
        for i in range(n):
            for j in range(i + 1, n):
                if gen.random() < density:
                    G.add_edge(i, j)
        return build(n, sorted(nx.transitive_reduction(G).edges()))
    raise ValueError(f"unknown poset family {family!r}")


def order_consistent_costs(P: Poset, gen, budget_frac: float | None = None, label: str = "c0") -> CostFunction:
    w = np.zeros(P.n)
    for p in P.topo:
        base = max((w[q] for q in P.preds[p]), default=0.0)
        w[p] = round(base + gen.uniform(0.2, 1.5), 3)
    frac = budget_frac if budget_frac is not None else gen.uniform(0.3, 0.6)
    return CostFunction(w, round(frac * float(w.sum()), 3), label)


def dr_coverage(P: Poset, gen, shared_items: int | None = None):
    """Coverage objective whose private item per element dominates everything above it."""
    m = shared_items if shared_items is not None else max(2, P.n)
    shared_w = {f"s{i}": round(float(gen.uniform(0.5, 2.0)), 3) for i in range(m)}
    sets = [set(gen.choice(m, size=int(gen.integers(0, min(3, m) + 1)), replace=False).tolist()) for _ in range(P.n)]
    priv = np.zeros(P.n)
    for p in reversed(P.topo):
        need = max((priv[q] + sum(shared_w[f"s{i}"] for i in sets[q]) for q in P.succs[p]), default=0.0)
        priv[p] = round(need + float(gen.uniform(0.2, 1.5)), 3)
    universe = dict(shared_w)
    sensors = []
    for p in range(P.n):
        universe[f"r{p}"] = float(priv[p])
        sensors.append({f"s{i}" for i in sets[p]} | {f"r{p}"})
    return make_coverage(universe, sensors, P)


def dr_concave(P: Poset, gen, phi: str = "sqrt"):
    """phi(sum of weights) with weights non-increasing along the order."""
    w = np.zeros(P.n)
    for p in P.topo:
        top = min((w[q] for q in P.preds[p]), default=3.0)
        w[p] = round(top * float(gen.uniform(0.4, 1.0)), 4)
    return make_concave_modular(w, phi)


def generate(family: str, n: int, seed: int = 0, constraints: int = 1, objective: str | None = None,
             budget_frac: float | None = None, attempts: int = 20, validate_cap: int = 4096) -> Instance:
    """A validated random instance; retries with fresh draws when validation fails."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if budget_frac is not None and budget_frac < 0:
        raise ValueError("budget fraction must be non-negative")
    if objective is None:
        objective = "coverage" if family == "sensor" else "concave"
    last = None
    for a in range(attempts):
        gen = rngmod.split(seed, rngmod.GENERATOR, a)
        P = random_poset(family, n, gen)
        if objective == "coverage":
            f = dr_coverage(P, gen)
        elif objective == "concave":
            f = dr_concave(P, gen, str(gen.choice(["sqrt", "log1p"])))
        elif objective == "modular":
            f = make_modular(np.round(gen.uniform(0.5, 2.0, n), 3))
        else:
            raise ValueError(f"unknown objective {objective!r}")
        cons = [order_consistent_costs(P, gen, budget_frac, f"c{k}") for k in range(constraints)]
        try:
            return Instance(P, f, cons, validate=True, cap=validate_cap)
        except ValidationFailed as e:
            last = e
    raise ValidationFailed(f"no valid instance after {attempts} attempts", getattr(last, "report", None))


def suite(seed: int = 2024, count: int = 20, n_max: int = 8, max_constraints: int = 2) -> list[Instance]:
    """Seeded benchmark suite of small validated instances."""
    out = []
    fams = ("chain", "antichain", "forest", "layered", "sensor")
    for i in range(count):
        gen = rngmod.split(seed, rngmod.GENERATOR, 10_000 + i)
        fam = fams[i % len(fams)]
        n = int(gen.integers(4, n_max + 1))
        k = 1 + i % max_constraints
        obj = "coverage" if i % 2 == 0 or fam == "sensor" else "concave"
        out.append(generate(fam, n, seed=seed * 1000 + i, constraints=k, objective=obj))
    return out
