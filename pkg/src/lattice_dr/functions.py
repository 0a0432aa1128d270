"""Objective and cost oracles on the ideal lattice, with brute-force validators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import NotAnIdeal, ValidationFailed
from .poset import DEFAULT_IDEAL_CAP, Poset, admissible, count_ideals, enumerate_ideals, is_ideal, set_to_mask

TOL = 1e-9


class ObjectiveOracle:
    """A set function evaluated on ideals, memoised.

    ``descriptor`` records the family and parameters so the oracle can be
    serialised; oracles built from arbitrary callables carry
    ``{"family": "callable"}`` and cannot be written to an instance file.
    """

    def __init__(self, fn: Callable[[frozenset], float], descriptor: Mapping[str, Any] | None = None):
        self._fn = fn
        self.descriptor = dict(descriptor or {"family": "callable"})
        self._cache: dict[frozenset, float] = {}

    def __call__(self, X: Iterable[int]) -> float:
        X = X if isinstance(X, frozenset) else frozenset(X)
        v = self._cache.get(X)
        if v is None:
            v = float(self._fn(X))
            self._cache[X] = v
        return v

    eval = __call__

    def __repr__(self):
        return f"ObjectiveOracle({self.descriptor.get('family')})"


@dataclass
class CostFunction:
    """Additive knapsack cost with a budget; order-consistency is checked by :class:`Instance`."""

    weights: np.ndarray
    budget: float
    label: str = "c0"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights < 0):
            raise ValueError(f"negative cost weight in constraint {self.label}")
        if not (self.budget >= 0):
            raise ValueError(f"budget of {self.label} must be non-negative, got {self.budget}")
        self.budget = float(self.budget)

    def __call__(self, S: Iterable[int]) -> float:
        return cost_of(self, S)


def cost_of(c: CostFunction, S: Iterable[int]) -> float:
    idx = list(S)
    if not idx:
        return 0.0
    return float(c.weights[idx].sum())


@dataclass
class ValidationReport:
    ok: bool
    check: str
    witness: dict | None = None
    message: str = ""
    status: str = "validated"

    def __bool__(self):
        return self.ok


def marginal(f: ObjectiveOracle, T: Iterable[int], S: Iterable[int], P: Poset | None = None) -> float:
    T = frozenset(T)
    U = T | frozenset(S)
    if P is not None and not (is_ideal(P, U) and is_ideal(P, T)):
        raise NotAnIdeal(f"{sorted(U)} is not an ideal")
    return f(U) - f(T)


def _marginal_table(f, P, ideals):
    """M[i, p] = f(X_i + p) - f(X_i) for admissible p, NaN elsewhere."""
    M = np.full((len(ideals), P.n), np.nan)
    for i, X in enumerate(ideals):
        fX = f(X)
        for p in admissible(P, X):
            M[i, p] = f(X | {p}) - fX
    return M


def validate_dr(f: ObjectiveOracle, P: Poset, cap: int = DEFAULT_IDEAL_CAP, tol: float = TOL) -> ValidationReport:
    """Check f(X+p) - f(X) >= f(Y+q) - f(Y) for X <= Y, p <= q, p in adm(X), q in adm(Y)."""
    ideals = enumerate_ideals(P, cap)
    dtype = np.uint64 if P.n <= 64 else object
    masks = np.array([set_to_mask(X) for X in ideals], dtype=dtype)
    sub = (masks[:, None] & masks[None, :]) == masks[:, None]
    M = _marginal_table(f, P, ideals)
    valid = ~np.isnan(M)
    Mneg = np.where(valid, M, -np.inf)
    for q in range(P.n):
        # best[i] = largest q-marginal over ideals Y containing X_i
        cand = np.where(sub, Mneg[None, :, q], -np.inf)
        best = cand.max(axis=1)
        for p in range(P.n):
            if not P.leq[p, q]:
                continue
            bad = valid[:, p] & (M[:, p] < best - tol)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                j = int(np.argmax(cand[i]))
                witness = {
                    "X": sorted(ideals[i]), "Y": sorted(ideals[j]), "p": p, "q": q,
                    "marginal_X_p": float(M[i, p]), "marginal_Y_q": float(M[j, q]),
                }
                return ValidationReport(False, "dr", witness,
                                        f"DR violated: f_X(p)={M[i, p]:.6g} < f_Y(q)={M[j, q]:.6g}")
    return ValidationReport(True, "dr")


def validate_monotone(f: ObjectiveOracle, P: Poset, cap: int = DEFAULT_IDEAL_CAP, tol: float = TOL) -> ValidationReport:
    for X in enumerate_ideals(P, cap):
        fX = f(X)
        for p in sorted(admissible(P, X)):
            if f(X | {p}) < fX - tol:
                return ValidationReport(False, "monotone", {"X": sorted(X), "p": p},
                                        f"f decreases when adding {p} to {sorted(X)}")
    return ValidationReport(True, "monotone")


def validate_order_consistent(c: CostFunction, P: Poset) -> ValidationReport:
    w = c.weights
    if len(w) != P.n:
        return ValidationReport(False, "order_consistent", None, "weight vector length mismatch")
    for p, q in P.covers:
        if w[p] > w[q]:
            return ValidationReport(False, "order_consistent", {"p": p, "q": q, "c_p": float(w[p]), "c_q": float(w[q])},
                                    f"{c.label}: c({p})={w[p]:g} > c({q})={w[q]:g} although {p} <= {q}")
    return ValidationReport(True, "order_consistent")


# --- built-in families -------------------------------------------------------

def make_modular(weights: Sequence[float]) -> ObjectiveOracle:
    w = np.asarray(weights, dtype=float)
    return ObjectiveOracle(lambda X: float(sum(w[p] for p in X)),
                           {"family": "modular", "weights": w.tolist()})


def make_coverage(universe: Mapping[Any, float], sensors: Sequence[Iterable[Any]], P: Poset | None = None) -> ObjectiveOracle:
    """f(X) = total weight of the union of the sensors' item sets."""
    universe = dict(universe)
    sensors = [frozenset(s) for s in sensors]
    if P is not None and len(sensors) != P.n:
        raise ValueError("need one sensor item-set per poset element")
    missing = set().union(*sensors) - set(universe) if sensors else set()
    if missing:
        raise ValueError(f"sensor items missing from universe: {sorted(map(str, missing))}")

    def fn(X):
        covered = set()
        for p in X:
            covered |= sensors[p]
        return sum(universe[i] for i in covered)

    return ObjectiveOracle(fn, {"family": "coverage",
                                "universe": {str(k): float(v) for k, v in universe.items()},
                                "sensors": [sorted(map(str, s)) for s in sensors]})


_PHI = {
    "sqrt": lambda s, a: math.sqrt(s),
    "log1p": lambda s, a: math.log1p(s),
    "min": lambda s, a: min(s, a),
    "power": lambda s, a: s ** a,
}


def make_concave_modular(weights: Sequence[float], phi: str = "sqrt", param: float = 1.0) -> ObjectiveOracle:
    """f(X) = phi(sum of weights); phi in {sqrt, log1p, min(., param), (.)**param}."""
    if phi not in _PHI:
        raise ValueError(f"unknown phi {phi!r}")
    w = np.asarray(weights, dtype=float)
    g = _PHI[phi]
    return ObjectiveOracle(lambda X: g(float(sum(w[p] for p in X)), param),
                           {"family": "concave_modular", "weights": w.tolist(), "phi": phi, "param": float(param)})


def make_table(values: Mapping[frozenset, float]) -> ObjectiveOracle:
    table = {frozenset(k): float(v) for k, v in values.items()}

    def fn(X):
        try:
            return table[X]
        except KeyError:
            raise NotAnIdeal(f"no table value for {sorted(X)}") from None

    return ObjectiveOracle(fn, {"family": "table", "values": table})


def tabulate(f: ObjectiveOracle, P: Poset, cap: int = DEFAULT_IDEAL_CAP) -> ObjectiveOracle:
    return make_table({X: f(X) for X in enumerate_ideals(P, cap)})


def oracle_from_descriptor(desc: Mapping[str, Any], P: Poset) -> ObjectiveOracle:
    fam = desc.get("family")
    if fam == "modular":
        return make_modular(desc["weights"])
    if fam == "coverage":
        return make_coverage(desc["universe"], desc["sensors"], P)
    if fam == "concave_modular":
        return make_concave_modular(desc["weights"], desc.get("phi", "sqrt"), desc.get("param", 1.0))
    if fam == "table":
        return make_table(desc["values"])
    raise ValueError(f"unknown objective family {fam!r}")


# --- problem instance ----------------------------------------------------------

@dataclass
class Instance:
    """Poset, objective, and order-consistent knapsack constraints.

    With ``validate=True`` the constructor rejects inconsistent costs and, when
    the ideal count is at most ``cap``, runs the DR and monotonicity checks;
    above the cap the objective is marked "assumed".
    """

    poset: Poset
    objective: ObjectiveOracle
    constraints: list[CostFunction]
    validate: bool = True
    cap: int = 4096
    dr_status: str = field(default="unchecked", init=False)

    def __post_init__(self):
        self.constraints = list(self.constraints)
        for c in self.constraints:
            if len(c.weights) != self.poset.n:
                raise ValueError(f"constraint {c.label} has {len(c.weights)} weights for {self.poset.n} elements")
        if not self.validate:
            return
        for c in self.constraints:
            rep = validate_order_consistent(c, self.poset)
            if not rep:
                raise ValidationFailed(rep.message, rep)
        if count_ideals(self.poset, self.cap) > self.cap:
            self.dr_status = "assumed"
            return
        for rep in (validate_monotone(self.objective, self.poset, self.cap),
                    validate_dr(self.objective, self.poset, self.cap)):
            if not rep:
                raise ValidationFailed(rep.message, rep)
        self.dr_status = "validated"

    @property
    def n(self) -> int:
        return self.poset.n

    def f(self, X) -> float:
        return self.objective(X)

    def costs(self, X) -> list[float]:
        return [cost_of(c, X) for c in self.constraints]

    def is_feasible(self, X, tol: float = 1e-9) -> bool:
        return all(cost_of(c, X) <= c.budget + tol for c in self.constraints)
