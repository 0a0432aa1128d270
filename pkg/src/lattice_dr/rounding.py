"""Discrete pipeline: partial enumeration, randomized rounding and push down.

The deterministic parts of every branch (residual problems, continuous
greedy, truncated motions) are computed once; each trial then only draws
the two random ideals and applies the rejection, repair and push-down steps.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import NoConvergence
from .functions import CostFunction, Instance, ObjectiveOracle, cost_of
from .greedy import GreedyConfig, run as greedy_run
from .poset import Poset, admissible, enumerate_ideals, ideal_generated, is_ideal
from .ulm import ulm

FEAS_TOL = 1e-9

log = logging.getLogger(__name__)


@dataclass
class RoundingConfig:
    epsilon: float = 0.3
    enumeration_cap: int | None = 2
    trials: int = 200
    seed: int = 0
    greedy: GreedyConfig = field(default_factory=lambda: GreedyConfig(epsilon=0.05))
    h_override: int | None = None
    t_cap: int = 1 << 16
    threads: int | None = None

    def __post_init__(self):
        if not (0 < self.epsilon < 0.5):
            raise ValueError(f"epsilon_round must lie in (0, 1/2), got {self.epsilon}")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.enumeration_cap is not None and self.enumeration_cap < 0:
            raise ValueError("enumeration cap must be non-negative")

    def enumeration_size(self, n_constraints: int) -> int:
        """ceil(e * d / eps^3) with d the number of constraints, unless overridden."""
        if self.h_override is not None:
            return self.h_override
        return math.ceil(math.e * max(n_constraints, 1) / self.epsilon ** 3 - 1e-9)

    @property
    def removal_bound(self) -> int:
        return math.ceil(self.epsilon ** -3 - 1e-9)


# --- residual problems -------------------------------------------------------------

@dataclass
class ResidualProblem:
    kind: str                      # "value" or "cost"
    base: frozenset                # T, in parent indices
    elements: tuple[int, ...]      # parent index of each local element
    instance: Instance             # poset, f_T and residual budgets on the local elements
    budgets: list[float]

    def lift(self, X) -> frozenset:
        return frozenset(self.elements[i] for i in X)


def _residual(instance: Instance, T: frozenset, keep: list[int], kind: str) -> ResidualProblem:
    P = instance.poset
    keep = sorted(keep, key=P.topo.index)
    Q = P.induced(keep)
    f = instance.objective
    fT = f(T)
    emap = tuple(keep)
    g = ObjectiveOracle(lambda X: f(T | frozenset(emap[i] for i in X)) - fT, {"family": "callable"})
    budgets = [c.budget - cost_of(c, T) for c in instance.constraints]
    cons = [CostFunction(np.asarray(c.weights, float)[keep] if keep else np.zeros(0), max(b, 0.0), c.label)
            for c, b in zip(instance.constraints, budgets)]
    sub = Instance(Q, g, cons, validate=False)
    return ResidualProblem(kind, frozenset(T), emap, sub, budgets)


def value_threshold(fT: float, h: int) -> float:
    """f(T)/h, with h = 0 (nothing guessed) meaning no threshold."""
    if h <= 0:
        return math.inf
    return fT / h


def make_value_residual(instance: Instance, T, h: int, tol: float = 1e-12) -> ResidualProblem:
    """Elements p outside T whose principal ideal adds at most f(T)/h."""
    P = instance.poset
    T = frozenset(T)
    f = instance.objective
    fT = f(T)
    thr = value_threshold(fT, h)
    keep = [p for p in range(P.n) if p not in T and f(T | P.down(p)) - fT <= thr + tol]
    ks = set(keep)
    for p in keep:
        if any(q not in T and q not in ks for q in P.preds[p]):
            raise AssertionError("value residual is not closed downward")
    return _residual(instance, T, keep, "value")


@dataclass(frozen=True)
class BigSmallSplit:
    big: tuple[frozenset, ...]     # per constraint
    small: frozenset

    @property
    def any_big(self) -> frozenset:
        return frozenset().union(*self.big) if self.big else frozenset()


def split_big_small(instance: Instance, epsilon: float) -> BigSmallSplit:
    n = instance.poset.n
    big = tuple(frozenset(p for p in range(n) if c.weights[p] > epsilon ** 4 * c.budget)
                for c in instance.constraints)
    allbig = frozenset().union(*big) if big else frozenset()
    return BigSmallSplit(big, frozenset(range(n)) - allbig)


def make_cost_residual(instance: Instance, T, split: BigSmallSplit) -> ResidualProblem:
    T = frozenset(T)
    keep = [p for p in range(instance.poset.n) if p not in T and p in split.small]
    return _residual(instance, T, keep, "cost")


# --- push down ----------------------------------------------------------------------

def push_down(P: Poset, D1, D2):
    """Grow the ideal D2 by one admissible element below each element of D1.

    Elements of D1 are processed in topological order; for each, the
    smallest-index admissible element below it is added.  Returns
    ``(ideal, skipped)`` where ``skipped`` lists elements of D1 whose whole
    principal ideal was already present.
    """
    D1 = set(D1)
    D = set(D2)
    if D1 & D:
        raise ValueError("push_down needs disjoint inputs")
    skipped = []
    for p in (q for q in P.topo if q in D1):
        adm = admissible(P, D)
        cands = [q for q in sorted(adm) if P.leq[q, p]]
        if not cands:
            skipped.append(p)
            continue
        D.add(cands[0])
    return frozenset(D), skipped


# --- algorithm A on one instance ---------------------------------------------------------

@dataclass
class Branch:
    """Deterministic data of one big-element ideal T inside the rounding routine."""

    T: frozenset
    T_big: tuple[frozenset, ...]        # T'_lambda
    cost_residual: ResidualProblem
    z1: np.ndarray                      # truncated greedy point on the cost residual
    z2: np.ndarray                      # truncated motion towards x_T
    greedy_escapes: int
    greedy_value: float | None


@dataclass
class Prepared:
    instance: Instance
    split: BigSmallSplit
    branches: list[Branch]
    skipped: list[str]


def big_ideals(instance: Instance, split: BigSmallSplit, cap: int) -> list[frozenset]:
    """Feasible ideals generated by big elements (each listed once)."""
    P = instance.poset
    big = split.any_big
    out = []
    for T in enumerate_ideals(P, cap):
        if P.maximal(T) <= big and instance.is_feasible(T, FEAS_TOL):
            out.append(T)
    return out


def prepare(instance: Instance, cfg: RoundingConfig) -> Prepared:
    P = instance.poset
    eps = cfg.epsilon
    split = split_big_small(instance, eps)
    branches, skipped = [], []
    for T in big_ideals(instance, split, cfg.t_cap):
        T_big = tuple(frozenset(p for p in T if p in bl) for bl in split.big)
        res = make_cost_residual(instance, T, split)
        sub = res.instance
        try:
            if sub.poset.n:
                xbar, tr = greedy_run(sub, cfg.greedy)
                z1 = ulm(sub.poset, np.zeros(sub.poset.n), xbar)(1 - eps)
                esc, val = tr.escapes, tr.final_value
            else:
                z1, esc, val = np.zeros(0), 0, 0.0
            xT = np.zeros(P.n)
            xT[list(T)] = 1.0
            z2 = ulm(P, np.zeros(P.n), xT)(1 - eps)
        except NoConvergence as e:
            skipped.append(f"T={sorted(T)}: {e}")
            log.warning("skipping big-element ideal %s: %s", sorted(T), e)
            continue
        branches.append(Branch(T, T_big, res, z1, z2, esc, val))
    return Prepared(instance, split, branches, skipped)


@dataclass
class RoundOutcome:
    ideal: frozenset
    value: float
    calls: int = 0
    rejections: int = 0
    removals: list[list[int]] = field(default_factory=list)   # per call, per constraint
    fallbacks: int = 0
    pushdown_skips: int = 0
    infeasible: int = 0


def _sample(z: np.ndarray, gen: np.random.Generator) -> frozenset:
    u = gen.random(len(z))
    return frozenset(np.flatnonzero(u < z).tolist())


def round_prepared(prep: Prepared, cfg: RoundingConfig, gen: np.random.Generator) -> RoundOutcome:
    """One draw of the rounding routine over all prepared branches (steps 3 to 8)."""
    inst = prep.instance
    P = inst.poset
    cons = inst.constraints
    eps = cfg.epsilon
    f = inst.objective
    out = RoundOutcome(frozenset(), f(frozenset()))
    best_val = -math.inf
    for br in prep.branches:
        out.calls += 1
        D1 = br.cost_residual.lift(_sample(br.z1, gen))
        D2 = _sample(br.z2, gen)
        T_big = [set(s) for s in br.T_big]
        T_lam = [ideal_generated(P, s) for s in T_big]
        cg = [cost_of(c, t) for c, t in zip(cons, T_lam)]
        bbar = [c.budget - g for c, g in zip(cons, cg)]
        tight = [bb <= eps * c.budget for c, bb in zip(cons, bbar)]
        D = D1 | D2
        rejected = False
        for lam, c in enumerate(cons):
            if not tight[lam] and cost_of(c, D) > c.budget + FEAS_TOL:
                rejected = True
            if tight[lam] and cost_of(c, D - T_lam[lam]) > eps * c.budget + bbar[lam] + FEAS_TOL:
                rejected = True
        removals = [0] * len(cons)
        if rejected:
            out.rejections += 1
            result = frozenset()
        else:
            def violated():
                U = D1 | D2
                return [lam for lam, c in enumerate(cons) if cost_of(c, U) > c.budget + FEAS_TOL]

            viol = violated()
            while viol:
                lam = next((l for l in viol if tight[l] and T_big[l]), None)
                if lam is None:
                    lam = next((l for l in range(len(cons)) if tight[l] and T_big[l]), None)
                if lam is None:
                    # nothing left to remove: drop the sampled part of T entirely
                    D2 = frozenset()
                    out.fallbacks += 1
                    break
                c = cons[lam]
                p = max(sorted(T_big[lam]), key=lambda q: c.weights[q])
                T_big[lam].discard(p)
                T_lam[lam] = ideal_generated(P, T_big[lam])
                removals[lam] += 1
                D2 = D2 & frozenset().union(*T_lam)
                viol = violated()
            result, skipped = push_down(P, D1 - D2, D2)
            out.pushdown_skips += len(skipped)
        out.removals.append(removals)
        if not (is_ideal(P, result) and inst.is_feasible(result, FEAS_TOL)):
            out.infeasible += 1
            result = frozenset()
        v = f(result)
        if v > best_val:
            best_val, out.ideal, out.value = v, result, v
    if best_val == -math.inf:
        out.value = f(frozenset())
    return out


def round_once(instance: Instance, cfg: RoundingConfig, seed: int | None = None):
    """One run of the rounding routine on ``instance``; returns ``(ideal, outcome)``."""
    prep = prepare(instance, cfg)
    gen = rngmod.split(cfg.seed if seed is None else seed, rngmod.ROUND_TRIAL, 0)
    out = round_prepared(prep, cfg, gen)
    return out.ideal, out


# --- partial enumeration --------------------------------------------------------------

@dataclass
class EnumBranch:
    X_size: int
    T0: frozenset
    residual: ResidualProblem
    prepared: Prepared


@dataclass
class TrialResult:
    ideal: frozenset
    value: float
    stats: RoundOutcome


@dataclass
class SolveResult:
    ideal: frozenset
    value: float
    trial_values: list[float]
    trial_ideals: list[frozenset]
    mean: float
    half_width: float
    calls: int
    rejections: int
    max_removals: list[int]
    removal_bound: int
    fallbacks: int
    pushdown_skips: int
    infeasible: int
    enumeration_size: int
    enumeration_limit: int
    enumeration_truncated: bool
    branches: int
    greedy_runs: int
    greedy_escapes: int
    continuous_value: float | None

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.calls if self.calls else 0.0


def enumerate_branches(instance: Instance, cfg: RoundingConfig):
    P = instance.poset
    H = cfg.enumeration_size(len(instance.constraints))
    limit = H if cfg.enumeration_cap is None else min(H, cfg.enumeration_cap)
    seen = set()
    out = []
    for k in range(0, min(limit, P.n) + 1):
        for X in itertools.combinations(range(P.n), k):
            T0 = ideal_generated(P, X)
            key = (T0, k)
            if key in seen:
                continue
            seen.add(key)
            if not instance.is_feasible(T0, FEAS_TOL):
                continue
            res = make_value_residual(instance, T0, k)
            out.append(EnumBranch(k, T0, res, prepare(res.instance, cfg)))
    return out, H, limit


def max_threads(cfg: RoundingConfig) -> int:
    if cfg.threads is not None:
        n = cfg.threads
    else:
        n = int(os.environ.get("LATTICE_DR_MAX_THREADS", "1") or 1)
    return n if n > 0 else (os.cpu_count() or 1)


def run_trial(instance: Instance, branches: list[EnumBranch], cfg: RoundingConfig, trial: int) -> TrialResult:
    gen = rngmod.split(cfg.seed, rngmod.ROUND_TRIAL, trial)
    f = instance.objective
    agg = RoundOutcome(frozenset(), f(frozenset()))
    best, best_val = frozenset(), -math.inf
    for br in branches:
        o = round_prepared(br.prepared, cfg, gen)
        S = br.T0 | br.residual.lift(o.ideal)
        agg.calls += o.calls
        agg.rejections += o.rejections
        agg.removals.extend(o.removals)
        agg.fallbacks += o.fallbacks
        agg.pushdown_skips += o.pushdown_skips
        agg.infeasible += o.infeasible
        if not (is_ideal(instance.poset, S) and instance.is_feasible(S, FEAS_TOL)):
            agg.infeasible += 1
            continue
        v = f(S)
        if v > best_val:
            best, best_val = S, v
    if best_val == -math.inf:
        best, best_val = frozenset(), f(frozenset())
    return TrialResult(best, best_val, agg)


def solve(instance: Instance, cfg: RoundingConfig | None = None) -> SolveResult:
    """Partial enumeration around the rounding routine, repeated over seeded trials.

    The returned ideal is the best over trials; the mean and its 95%
    half-width estimate the expected value of a single run.
    """
    cfg = cfg or RoundingConfig()
    branches, H, limit = enumerate_branches(instance, cfg)
    threads = max_threads(cfg)
    trials = range(cfg.trials)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda t: run_trial(instance, branches, cfg, t), trials))
    else:
        results = [run_trial(instance, branches, cfg, t) for t in trials]
    vals = np.array([r.value for r in results])
    bi = int(np.argmax(vals))
    nl = len(instance.constraints)
    maxrem = [0] * nl
    for r in results:
        for rem in r.stats.removals:
            for lam in range(nl):
                maxrem[lam] = max(maxrem[lam], rem[lam])
    hw = float(1.959963984540054 * vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    gruns = sum(len(b.prepared.branches) for b in branches)
    gesc = sum(br.greedy_escapes for b in branches for br in b.prepared.branches)
    cont = None
    for b in branches:
        if b.X_size == 0 and b.prepared.branches:
            cont = b.prepared.branches[0].greedy_value
    return SolveResult(
        ideal=results[bi].ideal, value=float(vals[bi]), trial_values=vals.tolist(),
        trial_ideals=[r.ideal for r in results],
        mean=float(vals.mean()), half_width=hw,
        calls=sum(r.stats.calls for r in results), rejections=sum(r.stats.rejections for r in results),
        max_removals=maxrem, removal_bound=cfg.removal_bound,
        fallbacks=sum(r.stats.fallbacks for r in results),
        pushdown_skips=sum(r.stats.pushdown_skips for r in results),
        infeasible=sum(r.stats.infeasible for r in results),
        enumeration_size=H, enumeration_limit=limit, enumeration_truncated=limit < H,
        branches=len(branches), greedy_runs=gruns, greedy_escapes=gesc, continuous_value=cont,
    )
