"""Multilinear extension of a lattice function on the median complex.

``F(x) = E[f(X)]`` where ``X`` contains each element ``p`` independently
with probability ``x_p``.  For a member ``x`` of the complex the random set
is always an ideal, and only the fractional coordinates are random, so the
exact value is a sum over subsets of the fractional coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .complex import CubeId, cube_of, snap
from .errors import CapExceeded
from .functions import ObjectiveOracle
from .poset import DEFAULT_IDEAL_CAP, Poset, enumerate_ideals
from .ulm import MERGE_TOL, ulm

DEFAULT_SAMPLES = 4096
EXACT_GRADIENT_DIM = 20
Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    value: float
    half_width: float
    samples: int
    seed: int | None


@dataclass
class Gradient:
    """Entries of the gradient with the derivative kind used for each."""

    values: np.ndarray
    flags: list[str]
    half_width: np.ndarray | None = None

    def __getitem__(self, p):
        return self.values[p]


def _subset_expectation(f, base: frozenset, coords: list[int], probs: np.ndarray, cap: int, extra=None):
    """Sum of f(base + S) * Pr[S] over subsets S of ``coords``.

    With ``extra`` set, the summand is f(base + S + extra) - f(base + S).
    """
    k = len(coords)
    if (1 << k) > cap:
        raise CapExceeded(f"{1 << k} subsets of {k} fractional coordinates exceed cap {cap}", count=1 << k, cap=cap)
    masks = np.arange(1 << k, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(k)) & 1).astype(bool)
    pr = np.prod(np.where(bits, probs[None, :], 1.0 - probs[None, :]), axis=1) if k else np.ones(1)
    vals = np.empty(len(masks))
    for i, row in enumerate(bits):
        S = base | frozenset(c for c, b in zip(coords, row) if b)
        vals[i] = f(S) if extra is None else f(S | extra) - f(S)
    return float(pr @ vals)


def eval_exact(f: ObjectiveOracle, P: Poset, x, cap: int = DEFAULT_IDEAL_CAP) -> float:
    x = snap(x)
    ones = frozenset(np.flatnonzero(x == 1.0).tolist())
    fr = np.flatnonzero((x > 0) & (x < 1)).tolist()
    return _subset_expectation(f, ones, fr, x[fr], cap)


def eval_over_ideals(f: ObjectiveOracle, P: Poset, x, cap: int = DEFAULT_IDEAL_CAP) -> float:
    """Literal sum over every ideal of f(X) * prod x_p * prod (1 - x_p)."""
    x = snap(x)
    total = 0.0
    for X in enumerate_ideals(P, cap):
        w = 1.0
        for p in range(P.n):
            w *= x[p] if p in X else 1.0 - x[p]
            if w == 0.0:
                break
        if w:
            total += w * f(X)
    return total


def eval_in_cube(f: ObjectiveOracle, P: Poset, cube: CubeId, x, cap: int = DEFAULT_IDEAL_CAP) -> float:
    """Set multilinear extension restricted to one cube (x must lie in its closure)."""
    x = snap(x)
    anti = sorted(cube.antichain)
    return _subset_expectation(f, frozenset(cube.base), anti, x[anti], cap)


def sample_ideal(P: Poset, x, rng: np.random.Generator) -> frozenset:
    x = snap(x)
    u = rng.random(P.n)
    return frozenset(np.flatnonzero(u < x).tolist())


def eval_mc(f: ObjectiveOracle, P: Poset, x, n: int = DEFAULT_SAMPLES, seed: int = 0,
            op: int = rngmod.MC_EVAL) -> Estimate:
    if n < 1:
        raise ValueError("need at least one sample")
    x = snap(x)
    if np.all((x == 0) | (x == 1)):
        return Estimate(f(frozenset(np.flatnonzero(x).tolist())), 0.0, n, seed)
    vals = np.array([f(sample_ideal(P, x, rngmod.split(seed, op, i))) for i in range(n)])
    hw = Z95 * vals.std(ddof=1) / np.sqrt(n) if n > 1 else float("inf")
    return Estimate(float(vals.mean()), float(hw), n, seed)


def derivative_kind(P: Poset, x, p: int) -> str:
    """'forward', 'backward' or 'zero' following the one-sided derivative rule."""
    kinds = _defined(P, snap(x), p)
    for k in ("forward", "backward"):
        if k in kinds:
            return k
    return "zero"


def marginal_expectation(f: ObjectiveOracle, P: Poset, x, p: int, cap: int = DEFAULT_IDEAL_CAP) -> float:
    """E[f(X + p) - f(X)] with X drawn from x and p held out.

    Meaningful when p's predecessors are at 1 and its successors at 0; this
    is the rate of change of F along coordinate p on either side.
    """
    x = snap(x)
    ones = frozenset(np.flatnonzero(x == 1.0).tolist()) - {p}
    fr = [q for q in np.flatnonzero((x > 0) & (x < 1)).tolist() if q != p]
    return _subset_expectation(f, ones, fr, x[fr], cap, extra=frozenset([p]))


def gradient(f: ObjectiveOracle, P: Poset, x, mode: str = "exact", cap: int = DEFAULT_IDEAL_CAP,
             samples: int = DEFAULT_SAMPLES, seed: int = 0, op: int = rngmod.MC_GRADIENT) -> Gradient:
    """Gradient with the one-sided rule: forward if defined, else backward, else 0."""
    x = snap(x)
    vals = np.zeros(P.n)
    flags = []
    hw = np.zeros(P.n) if mode == "mc" else None
    for p in range(P.n):
        kind = derivative_kind(P, x, p)
        flags.append(kind)
        if kind == "zero":
            continue
        if mode == "exact":
            vals[p] = marginal_expectation(f, P, x, p, cap)
        elif mode == "mc":
            xp = x.copy()
            xp[p] = 0.0
            d = np.empty(samples)
            for i in range(samples):
                X = sample_ideal(P, xp, rngmod.split(seed, op, p, i))
                d[i] = f(X | {p}) - f(X)
            vals[p] = d.mean()
            hw[p] = Z95 * d.std(ddof=1) / np.sqrt(samples) if samples > 1 else float("inf")
        else:
            raise ValueError(f"unknown gradient mode {mode!r}")
    return Gradient(vals, flags, hw)


def auto_mode(x) -> str:
    x = snap(x)
    k = int(np.count_nonzero((x > 0) & (x < 1)))
    return "exact" if k <= EXACT_GRADIENT_DIM else "mc"


# --- property checks ------------------------------------------------------------

@dataclass
class CheckReport:
    ok: bool
    checked: int = 0
    worst: float = 0.0
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


def _random_comparable_pair(P, gen):
    from .complex import meet, random_point
    y = random_point(P, gen)
    z = random_point(P, gen)
    return snap(meet(y, z)), y


def check_dr_gradient(f: ObjectiveOracle, P: Poset, trials: int = 500, seed: int = 0,
                      tol: float = 1e-7, cap: int = DEFAULT_IDEAL_CAP, max_draws: int | None = None) -> CheckReport:
    """Random x <= y and p <= q: one-sided derivative at (x, p) dominates that at (y, q).

    A trial counts once at least one of the four inequalities is defined.
    """
    rep = CheckReport(True)
    pairs = [(p, q) for p in range(P.n) for q in range(P.n) if P.leq[p, q]]
    draws = 0
    limit = max_draws if max_draws is not None else 200 * trials
    while rep.checked < trials and draws < limit and pairs:
        gen = rngmod.split(seed, rngmod.TEST, draws)
        draws += 1
        x, y = _random_comparable_pair(P, gen)
        p, q = pairs[int(gen.integers(len(pairs)))]
        kx = _defined(P, x, p)
        ky = _defined(P, y, q)
        if not kx or not ky:
            continue
        lhs = marginal_expectation(f, P, x, p, cap)
        rhs = marginal_expectation(f, P, y, q, cap)
        rep.checked += 1
        gap = rhs - lhs
        rep.worst = max(rep.worst, gap)
        if gap > tol:
            rep.ok = False
            rep.violations.append({"x": x.tolist(), "y": y.tolist(), "p": p, "q": q,
                                   "kinds": (sorted(kx), sorted(ky)), "lhs": lhs, "rhs": rhs})
    rep.details["draws"] = draws
    return rep


def _defined(P, x, p) -> set:
    preds_one = all(x[q] == 1.0 for q in P.preds[p])
    succs_zero = all(x[q] == 0.0 for q in P.succs[p])
    out = set()
    if x[p] < 1 and preds_one:
        out.add("forward")
    if x[p] > 0 and preds_one and succs_zero:
        out.add("backward")
    return out


def check_concavity_along_ulm(f: ObjectiveOracle, P: Poset, x, y, grid: int = 64, tol: float = 1e-7,
                              cap: int = DEFAULT_IDEAL_CAP, motion=None) -> CheckReport:
    """Concavity of h(t) = F(u(t)) on a uniform grid plus breakpoints, and the face inequality.

    Slope differences between consecutive segments must not exceed
    ``tol * range(h)``; at each interior breakpoint the right derivative
    must not exceed the left derivative by more than the same amount.
    """
    u = motion if motion is not None else ulm(P, x, y)
    ts = sorted(set(np.linspace(0.0, 1.0, grid + 1).tolist()) | set(u.breakpoints))
    pts = []
    for t in ts:
        if not pts or t - pts[-1] > 1e-9:
            pts.append(t)
    ts = np.array(pts)
    h = np.array([eval_exact(f, P, u(t), cap) for t in ts])
    rng_h = float(h.max() - h.min())
    allow = tol * max(rng_h, 1.0e-12) + 1e-12
    slopes = np.diff(h) / np.diff(ts)
    second = np.diff(slopes)
    rep = CheckReport(True, checked=len(second))
    rep.worst = float(second.max()) if len(second) else 0.0
    bad = np.flatnonzero(second > allow)
    for i in bad:
        rep.ok = False
        rep.violations.append({"kind": "second_difference", "t": float(ts[i + 1]), "value": float(second[i])})
    faces = []
    for t in u.breakpoints:
        if t <= MERGE_TOL or t >= 1 - MERGE_TOL:
            continue
        z = u(t)
        vm, vp = u.velocity(t, "-"), u.velocity(t, "+")
        m = np.array([marginal_expectation(f, P, z, p, cap) if (vm[p] or vp[p]) else 0.0 for p in range(P.n)])
        dplus, dminus = float(vp @ m), float(vm @ m)
        faces.append((t, dplus, dminus))
        if dplus > dminus + allow:
            rep.ok = False
            rep.violations.append({"kind": "face", "t": t, "d_plus": dplus, "d_minus": dminus})
    rep.details = {"range": rng_h, "faces": faces, "points": len(ts)}
    return rep
