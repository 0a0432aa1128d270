from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from hypothesis import strategies as st

from lattice_dr.functions import ObjectiveOracle
from lattice_dr.io import load_instance
from lattice_dr.poset import build


def example_poset():
    # p1 isolated; p2 below both p3 and p4
    return build(4, [(1, 2), (1, 3)], ["p1", "p2", "p3", "p4"])


def random_poset(rng, n, density=0.3):
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    perm = rng.permutation(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                G.add_edge(int(perm[i]), int(perm[j]))
    return build(n, sorted(nx.transitive_reduction(G).edges()))


@st.composite
def posets(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    edges = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    G.add_edges_from((a, b) for a, b in edges if a < b)
    return build(n, sorted(nx.transitive_reduction(G).edges()))


@pytest.fixture
def P4():
    return example_poset()


FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def example_instance():
    inst, fixture = load_instance(FIXTURES / "example.json")
    return inst


def square_count():
    """f(X) = |X|^2: monotone, increasing returns, so never DR."""
    return ObjectiveOracle(lambda X: float(len(X)) ** 2)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
