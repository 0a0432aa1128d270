"""Uniform linear motions on the median complex.

The motion from ``x`` to ``y`` is read off the unique maximiser of
``sum_p |w_p| log v_p`` over ``sum_p |w_p|``-flows ``v`` through the
dependency network of the moving coordinates (``w = y - x``).  Each moving
coordinate ``p`` then travels at constant speed ``v_p`` during one window
whose start is the longest path (in durations ``|w_q| / v_q``) from the
virtual source.

Two solvers are provided: an exact closed form for series-parallel networks
and a primal log-barrier Newton method for the general case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .complex import SNAP, is_member, snap
from .errors import EmptyMotion, NoConvergence
from .poset import Poset

BOT = -1
TOP = -2
MERGE_TOL = 1e-10
POSITIVE_ARC = 1e-8


@dataclass(frozen=True)
class UlmNetwork:
    poset: Poset
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    nodes: tuple[int, ...]                 # moving elements, in network topological order
    arcs: tuple[tuple[int, int], ...]      # (tail, head), BOT/TOP for the virtual terminals
    demand: float

    def work(self, p: int) -> float:
        return abs(float(self.w[p]))


def build_network(P: Poset, x, y) -> UlmNetwork:
    x = snap(x)
    y = snap(y)
    w = y - x
    w[np.abs(w) <= SNAP] = 0.0
    pos = {p for p in range(P.n) if w[p] > 0}
    neg = {p for p in range(P.n) if w[p] < 0}
    if not pos and not neg:
        raise EmptyMotion("x and y coincide")
    arcs = []
    for p, q in P.covers:
        if p in pos and q in pos:
            arcs.append((p, q))
        elif p in neg and q in neg:
            arcs.append((q, p))
    for p in sorted(pos):
        if not any(r in pos for r in P.preds[p]):
            arcs.append((BOT, p))
        if not any(r in pos for r in P.succs[p]):
            arcs.append((p, TOP))
    for p in sorted(neg):
        if not any(r in neg for r in P.succs[p]):
            arcs.append((BOT, p))
        if not any(r in neg for r in P.preds[p]):
            arcs.append((p, TOP))
    rank = {p: i for i, p in enumerate(P.topo)}
    nodes = sorted(pos, key=rank.get) + sorted(neg, key=lambda p: -rank[p])
    arcs.sort(key=lambda e: (e[0] != BOT, rank.get(e[0], -1), e[1] == TOP, rank.get(e[1], -1)))
    return UlmNetwork(P, x, y, w, tuple(nodes), tuple(arcs), float(np.abs(w).sum()))


# --- series-parallel closed form ----------------------------------------------

def _sp_decompose(net: UlmNetwork):
    """Series-parallel decomposition tree, or None when the network is not SP.

    Nodes become edges ``(p, in) -> (p, out)`` carrying their work; arcs
    become zero-work edges.  Parallel and series reductions are applied until
    a single source-sink edge remains.
    """
    S, T = ("s",), ("t",)

    def vin(p):
        return S if p == BOT else ("i", p)

    def vout(p):
        return T if p == TOP else ("o", p)

    edges = {}
    eid = 0
    for p in net.nodes:
        edges[eid] = [("i", p), ("o", p), ("node", p), net.work(p)]
        eid += 1
    for k, (s, t) in enumerate(net.arcs):
        tail = S if s == BOT else ("o", s)
        head = T if t == TOP else ("i", t)
        edges[eid] = [tail, head, ("arc", k), 0.0]
        eid += 1

    changed = True
    while changed and len(edges) > 1:
        changed = False
        groups = {}
        for e, (u, v, _, _) in edges.items():
            groups.setdefault((u, v), []).append(e)
        for (u, v), es in groups.items():
            if len(es) > 1:
                tree = ("par", [edges[e][2] for e in es], [edges[e][3] for e in es])
                work = sum(edges[e][3] for e in es)
                for e in es:
                    del edges[e]
                edges[eid] = [u, v, tree, work]
                eid += 1
                changed = True
        inc, out = {}, {}
        for e, (u, v, _, _) in edges.items():
            out.setdefault(u, []).append(e)
            inc.setdefault(v, []).append(e)
        for vtx in list(inc):
            if vtx in (S, T):
                continue
            if len(inc.get(vtx, ())) == 1 and len(out.get(vtx, ())) == 1:
                e1, e2 = inc[vtx][0], out[vtx][0]
                if e1 not in edges or e2 not in edges:
                    continue
                u, _, t1, w1 = edges[e1]
                _, v, t2, w2 = edges[e2]
                del edges[e1], edges[e2]
                edges[eid] = [u, v, ("ser", [t1, t2]), w1 + w2]
                eid += 1
                changed = True
                break
    if len(edges) != 1:
        return None
    (u, v, tree, _), = edges.values()
    if (u, v) != (S, T):
        return None
    return tree


def _sp_assign(tree, flow, v, g):
    kind = tree[0]
    if kind == "node":
        v[tree[1]] = flow
    elif kind == "arc":
        g[tree[1]] = flow
    elif kind == "ser":
        for sub in tree[1]:
            _sp_assign(sub, flow, v, g)
    else:
        subs, works = tree[1], tree[2]
        total = sum(works)
        if total <= 0:
            raise ValueError("zero-work parallel block")
        for sub, wk in zip(subs, works):
            _sp_assign(sub, flow * wk / total, v, g)


def solve_series_parallel(net: UlmNetwork):
    """Exact speeds and arc flows for series-parallel networks, else None."""
    tree = _sp_decompose(net)
    if tree is None:
        return None
    v, g = {}, {}
    try:
        _sp_assign(tree, net.demand, v, g)
    except ValueError:
        return None
    return v, np.array([g[k] for k in range(len(net.arcs))])


# --- general solver -------------------------------------------------------------

def _index(net):
    m = len(net.nodes)
    pos = {p: i for i, p in enumerate(net.nodes)}
    pos[BOT], pos[TOP] = m, m + 1
    arcs = np.array([(pos[s], pos[t]) for s, t in net.arcs], dtype=int)
    return m, pos, arcs


def _initial_flow(net, rng=None):
    """Strictly positive feasible flow: one source-sink path through every arc."""
    m, pos, arcs = _index(net)
    k = len(arcs)
    first_in = {}
    first_out = {}
    for e, (s, t) in enumerate(arcs):
        first_in.setdefault(t, e)
        first_out.setdefault(s, e)
    g = np.zeros(k)
    for e in range(k):
        wt = 1.0 if rng is None else rng.uniform(0.1, 1.0)
        path = [e]
        s = arcs[e][0]
        while s != m:
            e2 = first_in[s]
            path.append(e2)
            s = arcs[e2][0]
        t = arcs[e][1]
        while t != m + 1:
            e2 = first_out[t]
            path.append(e2)
            t = arcs[e2][1]
        g[path] += wt
    src = g[arcs[:, 0] == m].sum()
    return g / src


def solve_barrier(net: UlmNetwork, tol: float = 1e-10, max_iter: int = 100_000, rng=None,
                  mu0: float = 0.1, mu_min: float = 1e-30):
    """Log-barrier Newton method on arc flows (total flow scaled to 1)."""
    m, _, arcs = _index(net)
    k = len(arcs)
    a = np.array([net.work(p) for p in net.nodes]) / net.demand
    B = np.zeros((m, k))
    for e, (s, t) in enumerate(arcs):
        if t < m:
            B[t, e] = 1.0
    A = np.zeros((m + 1, k))
    for e, (s, t) in enumerate(arcs):
        if t < m:
            A[t, e] += 1.0
        if s < m:
            A[s, e] -= 1.0
        if s == m:
            A[m, e] = 1.0

    def psi(g, mu):
        return float(a @ np.log(B @ g) + mu * np.log(g).sum())

    g = _initial_flow(net, rng)
    mu = mu0
    iters = 0
    while True:
        for _ in range(200):
            iters += 1
            if iters > max_iter:
                raise NoConvergence("barrier iteration limit reached")
            v = B @ g
            grad_s = g * (B.T @ (a / v)) + mu
            BG = B * g
            H = BG.T @ (BG * (a / v ** 2)[:, None]) + mu * np.eye(k)
            AG = A * g
            K = np.block([[H, -AG.T], [AG, np.zeros((m + 1, m + 1))]])
            rhs = np.concatenate([grad_s, np.zeros(m + 1)])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            d = sol[:k]
            # d'Hd equals grad.d on the feasible subspace but does not suffer the multiplier cancellation
            dec = float(d @ H @ d)
            if dec <= 1e-24 + 1e-14 * mu:
                break
            neg = d < 0
            alpha = 1.0
            if neg.any():
                alpha = min(1.0, 0.99 / float(np.max(-d[neg])))
            base = psi(g, mu)
            # below the float resolution of psi the Armijo test cannot decide, so take the damped step
            resolvable = dec > 1e-13 * max(1.0, abs(base))
            while resolvable and alpha > 1e-16:
                gn = g * (1 + alpha * d)
                if np.all(gn > 0) and psi(gn, mu) >= base + 0.25 * alpha * dec - 1e-15 * abs(base):
                    break
                alpha *= 0.5
            g = g * (1 + alpha * d)
            if alpha * np.max(np.abs(d)) < 1e-15:
                break
        if mu <= mu_min:
            break
        mu = max(mu * 0.1, mu_min)
    v = B @ g
    speeds = {p: float(v[i] * net.demand) for i, p in enumerate(net.nodes)}
    return speeds, g * net.demand


def schedule(net: UlmNetwork, speeds: dict):
    """Longest-path start times and the KKT gap on positive arcs.

    Returns ``(start, finish, makespan, residual)`` in unnormalised time;
    ``residual`` is measured after normalising the makespan to 1.
    """
    start = {}
    finish = {BOT: 0.0}
    incoming = {}
    for s, t in net.arcs:
        incoming.setdefault(t, []).append(s)
    for p in net.nodes:
        start[p] = max(finish[s] for s in incoming[p])
        finish[p] = start[p] + net.work(p) / speeds[p]
    makespan = max(finish[s] for s in incoming[TOP])
    return start, finish, makespan


def kkt_residual(net: UlmNetwork, speeds: dict, arc_flows) -> float:
    start, finish, makespan = schedule(net, speeds)
    start = dict(start)
    start[TOP] = makespan
    thr = POSITIVE_ARC * net.demand
    gap = abs(makespan - 1.0)
    for (s, t), ge in zip(net.arcs, arc_flows):
        if ge > thr:
            gap = max(gap, start[t] - finish[s])
    # conservation in speed units
    inflow = {p: 0.0 for p in net.nodes}
    outflow = {p: 0.0 for p in net.nodes}
    for (s, t), ge in zip(net.arcs, arc_flows):
        if t in inflow:
            inflow[t] += ge
        if s in outflow:
            outflow[s] += ge
    for p in net.nodes:
        gap = max(gap, abs(inflow[p] - speeds[p]) / net.demand, abs(outflow[p] - speeds[p]) / net.demand)
    return float(gap)


@dataclass(frozen=True)
class UlmSolution:
    """Speeds, activation windows (normalised to [0, 1]) and diagnostics."""

    network: UlmNetwork
    speeds: dict
    start: dict
    end: dict
    arc_flows: np.ndarray
    breakpoints: tuple[float, ...]
    scale: float
    residual: float
    method: str


def solve_flow(net: UlmNetwork, tol: float = 1e-10, method: str = "auto", rng=None) -> UlmSolution:
    """Solve the flow program and build the normalised schedule.

    ``method`` is ``"auto"`` (series-parallel closed form when applicable,
    else barrier), ``"sp"`` or ``"barrier"``.
    """
    res = None
    used = method
    if method in ("auto", "sp"):
        res = solve_series_parallel(net)
        used = "sp"
        if res is None and method == "sp":
            raise ValueError("network is not series-parallel")
    if res is None:
        res = solve_barrier(net, tol=tol, rng=rng)
        used = "barrier"
    speeds, g = res
    residual = kkt_residual(net, speeds, g)
    if residual > tol:
        raise NoConvergence(f"KKT residual {residual:.3g} exceeds {tol:.3g}", residual=residual)
    start, finish, makespan = schedule(net, speeds)
    s = {p: start[p] / makespan for p in net.nodes}
    e = {p: min(finish[p] / makespan, 1.0) for p in net.nodes}
    speeds_n = {p: speeds[p] * makespan for p in net.nodes}
    bps = _merge_times([0.0, 1.0] + list(s.values()) + list(e.values()))
    return UlmSolution(net, speeds_n, s, e, g, tuple(bps), makespan, residual, used)


def _merge_times(ts, tol=MERGE_TOL):
    out = []
    for t in sorted(ts):
        if not out or t - out[-1] > tol:
            out.append(t)
    return out


class UniformLinearMotion:
    """Callable curve ``t -> u(t)`` from ``x`` to ``y`` on the complex of ``P``."""

    def __init__(self, P: Poset, x, y, solution: UlmSolution | None):
        self.poset = P
        self.x = snap(x)
        self.y = snap(y)
        self.solution = solution
        n = P.n
        self._start = np.zeros(n)
        self._end = np.ones(n)
        self._w = self.y - self.x
        self._moving = np.zeros(n, dtype=bool)
        if solution is not None:
            for p in solution.network.nodes:
                self._start[p] = solution.start[p]
                self._end[p] = solution.end[p]
                self._moving[p] = True
        self._w[~self._moving] = 0.0

    @property
    def is_constant(self) -> bool:
        return self.solution is None

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (0.0, 1.0) if self.solution is None else self.solution.breakpoints

    @property
    def speeds(self) -> np.ndarray:
        out = np.zeros(self.poset.n)
        if self.solution is not None:
            for p, sp in self.solution.speeds.items():
                out[p] = sp
        return out

    def __call__(self, t: float) -> np.ndarray:
        if not (-1e-12 <= t <= 1 + 1e-12):
            raise ValueError(f"t={t} outside [0, 1]")
        span = np.where(self._moving, self._end - self._start, 1.0)
        frac = np.clip((t - self._start) / span, 0.0, 1.0)
        u = np.where(self._moving, self.x + self._w * frac, self.x)
        if t >= 1.0:
            u = np.where(self._moving, self.y, u)
        return snap(np.clip(u, 0.0, 1.0))

    def velocity(self, t: float, side: str = "+") -> np.ndarray:
        """One-sided velocity: ``"+"`` just after ``t``, ``"-"`` just before."""
        v = np.zeros(self.poset.n)
        if self.solution is None:
            return v
        for p in self.solution.network.nodes:
            s, e = self.solution.start[p], self.solution.end[p]
            if side == "+":
                active = s <= t + MERGE_TOL and e > t + MERGE_TOL
            else:
                active = s < t - MERGE_TOL and e >= t - MERGE_TOL
            if active:
                v[p] = np.sign(self._w[p]) * self.solution.speeds[p]
        return v


def ulm(P: Poset, x, y, tol: float = 1e-10, method: str = "auto", rng=None) -> UniformLinearMotion:
    try:
        net = build_network(P, x, y)
    except EmptyMotion:
        return UniformLinearMotion(P, x, y, None)
    return UniformLinearMotion(P, x, y, solve_flow(net, tol=tol, method=method, rng=rng))


def evaluate(P: Poset, x, y, t: float, **kw) -> np.ndarray:
    return ulm(P, x, y, **kw)(t)


# --- straightness ------------------------------------------------------------------

@dataclass
class StraightnessReport:
    ok: bool
    time: float | None = None
    v_minus: np.ndarray | None = None
    v_plus: np.ndarray | None = None
    witness: dict = field(default_factory=dict)      # (from, to) -> flow, in unit-total-speed units
    residual: float = 0.0
    certificate: dict | None = None
    checks: list = field(default_factory=list)


def straightness_at(P: Poset, v_minus, v_plus, tol: float = 1e-9) -> StraightnessReport:
    """Feasibility of the velocity-conservation flow at a face crossing.

    Before-speeds feed after-speeds: an increasing coordinate ``p`` may pass
    its speed to an increasing ``q`` with ``p <= q``; a decreasing ``q`` may
    pass to a decreasing ``p`` with ``p <= q``.  Speeds are normalised so
    their absolute values sum to 1 on each side.
    """
    vm = np.asarray(v_minus, float)
    vp = np.asarray(v_plus, float)
    total = np.abs(vm).sum()
    if total == 0 and np.abs(vp).sum() == 0:
        return StraightnessReport(True, None, vm, vp)
    if total == 0:
        return StraightnessReport(False, None, vm, vp, certificate={"reason": "motion starts from rest"})
    vm = vm / total
    vp = vp / total

    G = nx.DiGraph()
    sources, sinks = {}, {}
    for p in range(P.n):
        if vm[p] > tol:
            sources[("+", p)] = vm[p]
        if vp[p] > tol:
            sinks[("+", p)] = vp[p]
        if vp[p] < -tol:
            sources[("-", p)] = -vp[p]
        if vm[p] < -tol:
            sinks[("-", p)] = -vm[p]
    for u, cap in sources.items():
        G.add_edge("S", ("src",) + u, capacity=cap)
    for u, cap in sinks.items():
        G.add_edge(("snk",) + u, "T", capacity=cap)
    for (sg, a) in sources:
        for (tg, b) in sinks:
            if sg != tg:
                continue
            # "+": before a feeds after b when a <= b; "-": after a is fed by before b when a <= b
            if P.leq[a, b]:
                G.add_edge(("src", sg, a), ("snk", tg, b), capacity=float("inf"))
    supply = sum(sources.values())
    demand = sum(sinks.values())
    if not sources or not sinks:
        ok = abs(supply - demand) <= tol
        return StraightnessReport(ok, None, vm, vp, residual=abs(supply - demand),
                                  certificate=None if ok else {"reason": "imbalance", "supply": supply, "demand": demand})
    value, flow = nx.maximum_flow(G, "S", "T")
    witness = {}
    for (sg, a) in sources:
        for node, fl in flow[("src", sg, a)].items():
            if fl > 0:
                b = node[2]
                witness[(sg, a, b)] = float(fl)
    out_res = max(abs(sum(fl for (sg, a, _), fl in witness.items() if (sg, a) == k) - cap)
                  for k, cap in sources.items())
    in_res = max(abs(sum(fl for (sg, _, b), fl in witness.items() if (sg, b) == k) - cap)
                 for k, cap in sinks.items())
    residual = max(out_res, in_res, abs(supply - demand))
    ok = residual <= tol
    cert = None
    if not ok:
        _, (side_s, _) = nx.minimum_cut(G, "S", "T")
        blocked = sorted(u[1:] for u in side_s if isinstance(u, tuple) and u[0] == "src")
        reach = sorted(u[1:] for u in side_s if isinstance(u, tuple) and u[0] == "snk")
        cert = {"reason": "hall", "sources": blocked, "reachable_sinks": reach,
                "supply": float(sum(sources[b] for b in blocked)),
                "demand": float(sum(sinks[r] for r in reach)), "max_flow": float(value)}
    return StraightnessReport(ok, None, vm, vp, witness, residual, cert)


def verify_straightness(motion: UniformLinearMotion, tol: float = 1e-9) -> StraightnessReport:
    """Check conservation at every interior breakpoint of the motion."""
    if motion.is_constant:
        return StraightnessReport(True)
    worst = StraightnessReport(True)
    checks = []
    for t in motion.breakpoints:
        if t <= MERGE_TOL or t >= 1 - MERGE_TOL:
            continue
        rep = straightness_at(motion.poset, motion.velocity(t, "-"), motion.velocity(t, "+"), tol)
        rep.time = t
        checks.append(rep)
        if not rep.ok and worst.ok:
            worst = rep
    if worst.ok and checks:
        worst = max(checks, key=lambda c: c.residual)
    worst.checks = checks
    return worst


def trajectory_is_member(motion: UniformLinearMotion, ts: Sequence[float]) -> bool:
    return all(is_member(motion.poset, motion(t)) for t in ts)
