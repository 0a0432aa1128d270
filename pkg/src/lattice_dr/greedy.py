"""Continuous greedy over the median complex under knapsack constraints.

Each of the ``floor(1/eps)`` iterations spends at most ``eps * b`` of every
budget.  When the epsilon neighbourhood reaches outside the current cube the
iteration instead completes one coordinate (moving onto an upper cube);
otherwise it takes the LP-optimal step inside the cube along the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .complex import cube_of, snap
from .errors import NoConvergence
from .functions import CostFunction, Instance
from .multilinear import auto_mode, eval_exact, eval_mc, gradient
from .poset import DEFAULT_IDEAL_CAP, Poset
from .simplex import certify, maximize

FEAS_TOL = 1e-9


@dataclass
class GreedyConfig:
    epsilon: float = 0.05
    gradient_mode: str = "exact"       # exact, mc or auto
    samples: int = 4096
    cap: int = DEFAULT_IDEAL_CAP
    seed: int = 0
    lp_tol: float = 1e-9
    trace: bool = True
    escape_rule: str = "max_gradient"  # or "index"

    def __post_init__(self):
        if not (0 < self.epsilon < 1):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.gradient_mode not in ("exact", "mc", "auto"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.escape_rule not in ("max_gradient", "index"):
            raise ValueError(f"unknown escape rule {self.escape_rule!r}")

    @property
    def iterations(self) -> int:
        return int(math.floor(1.0 / self.epsilon + 1e-12))


@dataclass
class GreedyStep:
    k: int
    branch: str                 # "lp" or "escape"
    x: np.ndarray
    value: float | None
    usage: list[float]
    witness: int | None = None
    lp_certificate: float | None = None


@dataclass
class GreedyTrace:
    steps: list[GreedyStep] = field(default_factory=list)

    @property
    def escapes(self) -> int:
        return sum(s.branch == "escape" for s in self.steps)

    @property
    def final_value(self) -> float | None:
        return self.steps[-1].value if self.steps else None


def continuous_cost(c: CostFunction, x) -> float:
    return float(np.asarray(c.weights, float) @ np.asarray(x, float))


def free_coordinates(P: Poset, x) -> list[int]:
    """Coordinates of the current cube that can still grow."""
    x = snap(x)
    return sorted(p for p in cube_of(P, x).antichain if x[p] < 1.0)


def neighborhood_in_cube(P: Poset, x, g, constraints, epsilon: float, tol: float = 1e-9):
    """LP-optimal point of the epsilon neighbourhood restricted to the cube of ``x``.

    Returns ``(y, certificate)`` where ``certificate`` is the scaled
    primal/dual/gap violation of the vertex found.
    """
    x = snap(x)
    g = np.asarray(g, float)
    free = free_coordinates(P, x)
    if not free:
        return x.copy(), 0.0
    k = len(free)
    rows = [np.asarray(c.weights, float)[free] for c in constraints]
    rhs = [epsilon * c.budget for c in constraints]
    A = np.vstack(rows + [np.eye(k)]) if rows else np.eye(k)
    b = np.array(rhs + [1.0 - x[p] for p in free])
    cvec = g[free]
    res = maximize(cvec, A, b)
    cert = certify(cvec, A, b, res)
    if cert > tol:
        raise NoConvergence(f"LP certificate violation {cert:.3g}", residual=cert)
    y = x.copy()
    y[free] = np.minimum(1.0, x[free] + res.x)
    return snap(y), cert


def escape_witnesses(P: Poset, x, constraints, epsilon: float) -> list[int]:
    """Free coordinates whose completion unlocks a successor within the step budget.

    ``p`` qualifies when some cover ``q`` of ``p`` has all other lower covers
    at 1 and, for every constraint, ``c(p)(1 - x_p) + c(q) * delta <= eps * b``
    for some ``delta > 0``.
    """
    x = snap(x)
    out = []
    for p in free_coordinates(P, x):
        need = [float(c.weights[p]) * (1.0 - x[p]) for c in constraints]
        for q in P.succs[p]:
            if not all(x[r] == 1.0 for r in P.preds[q] if r != p):
                continue
            ok = True
            for c, nd in zip(constraints, need):
                room = epsilon * c.budget
                if not (nd < room or (nd <= room and c.weights[q] == 0)):
                    ok = False
                    break
            if ok:
                out.append(p)
                break
    return out


def neighborhood_escapes_cube(P: Poset, x, constraints, epsilon: float, g=None) -> int | None:
    """A witness element, or None when the neighbourhood stays inside the cube.

    With a gradient ``g`` the witness of largest gradient entry is chosen
    (ties by index); otherwise the smallest index.
    """
    cands = escape_witnesses(P, x, constraints, epsilon)
    if not cands:
        return None
    if g is None:
        return cands[0]
    g = np.asarray(g, float)
    return max(cands, key=lambda p: (g[p], -p))


def _value(inst: Instance, x, cfg: GreedyConfig, k: int) -> float:
    if auto_mode(x) == "exact":
        return eval_exact(inst.objective, inst.poset, x, cfg.cap)
    return eval_mc(inst.objective, inst.poset, x, cfg.samples, rngmod.split(cfg.seed, rngmod.GREEDY_STEP, k).integers(2**62)).value


def run(instance: Instance, config: GreedyConfig | None = None):
    """Run the continuous greedy; returns ``(x, trace)``."""
    cfg = config or GreedyConfig()
    P = instance.poset
    cons = instance.constraints
    x = np.zeros(P.n)
    trace = GreedyTrace()
    for k in range(cfg.iterations):
        mode = cfg.gradient_mode if cfg.gradient_mode != "auto" else auto_mode(x)
        seed_k = int(rngmod.split(cfg.seed, rngmod.GREEDY_STEP, k).integers(2**62))
        g = gradient(instance.objective, P, x, mode=mode, cap=cfg.cap, samples=cfg.samples, seed=seed_k).values
        witness = neighborhood_escapes_cube(P, x, cons, cfg.epsilon,
                                            g if cfg.escape_rule == "max_gradient" else None)
        if witness is not None:
            x = x.copy()
            x[witness] = 1.0
            branch, cert = "escape", None
        else:
            x, cert = neighborhood_in_cube(P, x, g, cons, cfg.epsilon, cfg.lp_tol)
            branch = "lp"
        usage = [continuous_cost(c, x) for c in cons]
        for c, u in zip(cons, usage):
            if u > c.budget + FEAS_TOL * max(1.0, c.budget):
                raise AssertionError(f"iterate {k + 1} exceeds budget {c.label}: {u} > {c.budget}")
        value = _value(instance, x, cfg, k) if cfg.trace else None
        trace.steps.append(GreedyStep(k, branch, x.copy(), value, usage, witness, cert))
    if not cfg.trace or not trace.steps:
        trace.steps.append(GreedyStep(cfg.iterations, "final", x.copy(), _value(instance, x, cfg, cfg.iterations),
                                      [continuous_cost(c, x) for c in cons]))
    return x, trace
