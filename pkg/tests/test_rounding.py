import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice_dr import rng as rngmod
from lattice_dr.functions import CostFunction, Instance, cost_of, make_concave_modular, make_modular
from lattice_dr.generate import FAMILIES, dr_coverage, generate
from lattice_dr.greedy import GreedyConfig
from lattice_dr.oracle import exact_opt
from lattice_dr.poset import antichain, build, enumerate_ideals, is_ideal
from lattice_dr.rounding import (
    Branch,
    Prepared,
    RoundingConfig,
    big_ideals,
    make_cost_residual,
    make_value_residual,
    prepare,
    push_down,
    round_once,
    round_prepared,
    solve,
    split_big_small,
    value_threshold,
)

from conftest import example_instance, example_poset, posets


def _mixed_instance(n_small=6):
    """Two big elements that nearly fill the budget plus cheap small ones (small at eps >= 0.45)."""
    w = [0.45, 0.45] + [0.04] * n_small
    vals = [3.0, 2.9] + list(np.linspace(0.5, 0.3, n_small))
    return Instance(antichain(len(w)), make_concave_modular(vals, "sqrt"), [CostFunction(w, 1.0)])


# --- configuration ---------------------------------------------------------------

def test_config_bounds():
    for eps in (0.0, 0.5, 0.7):
        with pytest.raises(ValueError):
            RoundingConfig(epsilon=eps)
    cfg = RoundingConfig(epsilon=0.3)
    assert cfg.enumeration_size(1) == math.ceil(math.e / 0.027)
    assert cfg.enumeration_size(2) == math.ceil(2 * math.e / 0.027)
    assert cfg.removal_bound == 38
    assert RoundingConfig(epsilon=0.45).removal_bound == 11


# --- residual problems -------------------------------------------------------------

def test_value_threshold_conventions():
    assert value_threshold(5.0, 0) == math.inf
    assert value_threshold(6.0, 3) == 2.0
    assert value_threshold(0.0, 2) == 0.0


def test_value_residual_empty_base_strictly_monotone():
    inst = example_instance()
    res = make_value_residual(inst, frozenset(), 1)
    assert res.elements == ()


def test_value_residual_huge_h_is_empty():
    inst = example_instance()
    T = frozenset({1})
    res = make_value_residual(inst, T, 10**9)
    assert res.elements == ()


def test_value_residual_matches_brute_marginals():
    inst = example_instance()
    P, f = inst.poset, inst.objective
    for T in enumerate_ideals(P):
        for h in (1, 2, 3):
            res = make_value_residual(inst, T, h)
            thr = f(T) / h
            expect = {p for p in range(P.n) if p not in T and f(T | P.down(p)) - f(T) <= thr + 1e-12}
            assert set(res.elements) == expect
            # induced order on the kept elements is closed downward inside the complement
            assert all(q in T or q in expect for p in expect for q in P.preds[p])


def test_value_residual_objective_and_budgets():
    inst = example_instance()
    f = inst.objective
    T = frozenset({1})
    res = make_value_residual(inst, T, 1)
    sub = res.instance
    for X in enumerate_ideals(sub.poset):
        assert sub.objective(X) == pytest.approx(f(T | res.lift(X)) - f(T))
    assert res.budgets == [3.0 - 1.0]


def test_cost_residual_examples():
    inst = example_instance()
    split = split_big_small(inst, 0.3)
    assert split.small == frozenset()
    assert make_cost_residual(inst, frozenset(), split).elements == ()
    cheap = Instance(inst.poset, inst.objective, [CostFunction([0.001, 0.001, 0.002, 0.002], 3.0)])
    split = split_big_small(cheap, 0.3)
    assert split.small == frozenset(range(4))
    assert set(make_cost_residual(cheap, frozenset(), split).elements) == {0, 1, 2, 3}
    assert set(make_cost_residual(cheap, frozenset({1, 2}), split).elements) == {0, 3}


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(3, 7), st.integers(1, 2), st.integers(0, 2**31),
       st.floats(0.05, 0.49))
def test_big_small_thresholds(family, n, m, seed, eps):
    inst = generate(family, n, seed=seed, constraints=m)
    split = split_big_small(inst, eps)
    for lam, c in enumerate(inst.constraints):
        for p in range(n):
            assert (p in split.big[lam]) == (c.weights[p] > eps ** 4 * c.budget)
    for p in range(n):
        assert (p in split.small) == all(c.weights[p] <= eps ** 4 * c.budget for c in inst.constraints)
    T = frozenset()
    res = make_cost_residual(inst, T, split)
    assert set(res.elements) == set(split.small)


def test_big_ideals_are_generated_by_big_elements():
    inst = _mixed_instance()
    split = split_big_small(inst, 0.45)
    Ts = big_ideals(inst, split, 4096)
    assert set(Ts) == {frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1})}


# --- push down -------------------------------------------------------------------

def test_push_down_examples():
    P = example_poset()
    assert push_down(P, set(), {1}) == (frozenset({1}), [])
    assert push_down(P, {2}, {1}) == (frozenset({1, 2}), [])
    # D1 an ideal, D2 empty: each element is its own admissible choice
    assert push_down(P, {1, 2, 3}, set()) == (frozenset({1, 2, 3}), [])
    # p3 alone over the empty ideal is pushed to p2
    assert push_down(P, {2}, set()) == (frozenset({1}), [])


def test_push_down_requires_disjoint():
    with pytest.raises(ValueError):
        push_down(example_poset(), {1}, {1})


@settings(max_examples=200, deadline=None)
@given(posets(max_n=7), st.integers(0, 2**31))
def test_push_down_properties(P, seed):
    gen = np.random.default_rng(seed)
    ideals = enumerate_ideals(P)
    D2 = ideals[int(gen.integers(len(ideals)))]
    D1 = frozenset(p for p in range(P.n) if p not in D2 and gen.random() < 0.5)
    w = np.zeros(P.n)
    for p in P.topo:
        w[p] = max((w[q] for q in P.preds[p]), default=0.0) + float(gen.uniform(0, 1))
    c = CostFunction(w, float(w.sum()))
    f = dr_coverage(P, gen)
    out, skipped = push_down(P, D1, D2)
    assert is_ideal(P, out) and D2 <= out
    assert not skipped and len(out) == len(D2) + len(D1)
    # each substitute sits below the element it replaces, so order-consistent costs cannot grow
    assert cost_of(c, out) <= cost_of(c, D1 | D2) + 1e-12
    # marginal dominance: the substitutes gain at least the telescoped marginals of D1 over D2
    assert f(out) - f(D2) >= f(D1 | D2) - f(D2) - 1e-9


# --- rounding routine ------------------------------------------------------------

def test_budget_zero_gives_empty():
    inst = example_instance()
    inst0 = Instance(inst.poset, inst.objective, [CostFunction([1, 1, 2, 2], 0.0)])
    X, out = round_once(inst0, RoundingConfig(epsilon=0.3), seed=0)
    assert X == frozenset() and out.value == 0.0


def test_no_big_elements_pipeline():
    gen = np.random.default_rng(5)
    P = build(6, [(0, 1), (0, 2), (3, 4)])
    w = np.zeros(6)
    for p in P.topo:
        w[p] = min((w[q] for q in P.preds[p]), default=2.0) * float(gen.uniform(0.5, 1))
    c = CostFunction([0.001] * 6, 1.0)
    inst = Instance(P, make_concave_modular(w, "sqrt"), [c])
    cfg = RoundingConfig(epsilon=0.3)
    prep = prepare(inst, cfg)
    assert len(prep.branches) == 1 and prep.branches[0].T == frozenset()
    for s in range(50):
        X, out = round_once(inst, cfg, seed=s)
        assert is_ideal(P, X) and inst.is_feasible(X)
        assert out.rejections == 0


def test_big_chain_optimum():
    # the optimum is one principal ideal of big elements
    P = build(4, [(0, 1), (1, 2)])
    f = make_modular([3.0, 2.0, 1.5, 0.1])
    inst = Instance(P, f, [CostFunction([1, 1, 1, 1], 3.0)])
    cfg = RoundingConfig(epsilon=0.3)
    target = frozenset({0, 1, 2})
    prep = prepare(inst, cfg)
    assert target in {br.T for br in prep.branches}
    # one draw samples the truncated motion towards x_T, so I_p is hit only sometimes
    vals = [round_once(inst, cfg, seed=s)[1].value for s in range(200)]
    assert max(vals) == pytest.approx(f(target))
    # the enumeration wrapper guesses I_p from its generator and returns it
    assert solve(inst, RoundingConfig(epsilon=0.3, trials=3)).value == pytest.approx(f(target))


def _forced_branch(inst, cfg, T, z1_value):
    split = split_big_small(inst, cfg.epsilon)
    res = make_cost_residual(inst, T, split)
    T_big = tuple(frozenset(p for p in T if p in bl) for bl in split.big)
    z2 = np.zeros(inst.n)
    z2[list(T)] = 1.0
    z1 = np.full(len(res.elements), z1_value)
    return Prepared(inst, split, [Branch(frozenset(T), T_big, res, z1, z2, 0, None)], [])


def test_rejection_branch_returns_empty():
    # 26 small elements of cost 0.04 exceed the unit budget when all are drawn
    n = 26
    inst = Instance(antichain(n), make_modular(np.linspace(1, 0.5, n)), [CostFunction([0.04] * n, 1.0)])
    cfg = RoundingConfig(epsilon=0.45)
    prep = _forced_branch(inst, cfg, frozenset(), 1.0)
    out = round_prepared(prep, cfg, np.random.default_rng(0))
    assert out.rejections == 1 and out.ideal == frozenset()


def test_removal_branch_restores_budget():
    w = [0.5, 0.45, 0.04, 0.04]
    inst = Instance(antichain(4), make_modular([3.0, 2.0, 0.5, 0.4]), [CostFunction(w, 1.0)])
    cfg = RoundingConfig(epsilon=0.45)
    prep = _forced_branch(inst, cfg, frozenset({0, 1}), 1.0)
    out = round_prepared(prep, cfg, np.random.default_rng(0))
    assert out.rejections == 0
    assert out.removals == [[1]]
    # the most expensive big element goes first
    assert out.ideal == frozenset({1, 2, 3})
    assert inst.is_feasible(out.ideal)


def test_removals_and_rejections_on_mixed_instance():
    inst = _mixed_instance()
    cfg = RoundingConfig(epsilon=0.45, enumeration_cap=0, trials=400, seed=1)
    r = solve(inst, cfg)
    assert r.infeasible == 0
    assert 1 <= max(r.max_removals) <= r.removal_bound
    p = len(inst.constraints) * cfg.epsilon
    sigma = math.sqrt(p * (1 - p) / r.calls)
    assert r.rejection_rate <= p + 3 * sigma


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(3, 6), st.integers(1, 2), st.integers(0, 2**31))
def test_every_trial_is_feasible(family, n, m, seed):
    inst = generate(family, n, seed=seed, constraints=m)
    cfg = RoundingConfig(epsilon=0.3, trials=20, seed=seed, greedy=GreedyConfig(0.1))
    r = solve(inst, cfg)
    for X in r.trial_ideals:
        assert is_ideal(inst.poset, X) and inst.is_feasible(X)
    assert r.infeasible == 0
    assert all(k <= r.removal_bound for k in r.max_removals)


# --- partial enumeration ------------------------------------------------------------

def test_empty_poset():
    inst = Instance(antichain(0), make_modular([]), [CostFunction([], 1.0)])
    r = solve(inst, RoundingConfig(trials=3))
    assert r.ideal == frozenset() and r.value == 0.0


def test_small_optimum_found_by_enumeration():
    inst = example_instance()
    r = solve(inst, RoundingConfig(epsilon=0.3, trials=5))
    opt = exact_opt(inst)
    # the optimum {p2, p4} is generated by the single element p4
    assert r.value == pytest.approx(opt.value)
    assert r.enumeration_truncated and r.enumeration_limit == 2


def test_trials_are_seeded():
    inst = example_instance()
    cfg = RoundingConfig(epsilon=0.3, trials=30, seed=7, enumeration_cap=0)
    a, b = solve(inst, cfg), solve(inst, cfg)
    assert a.trial_values == b.trial_values and a.trial_ideals == b.trial_ideals


def test_thread_count_does_not_change_results():
    inst = generate("forest", 6, seed=3, constraints=2)
    base = dict(epsilon=0.3, trials=40, seed=2)
    a = solve(inst, RoundingConfig(threads=1, **base))
    b = solve(inst, RoundingConfig(threads=4, **base))
    assert a.trial_values == b.trial_values and a.trial_ideals == b.trial_ideals


def test_split_streams_are_distinct():
    a = rngmod.split(1, rngmod.ROUND_TRIAL, 0).random(4)
    b = rngmod.split(1, rngmod.ROUND_TRIAL, 1).random(4)
    assert not np.allclose(a, b)
