"""Reference models, graphs and generators shared by the tests (0-based vertices)."""

import itertools

import numpy as np
from hypothesis import strategies as st

from ages.graph import Dag, MixedGraph, build_dag
from ages.sem import WeightedSem


def sem(p, weights, D=None):
    B = np.zeros((p, p))
    for (i, j), w in weights.items():
        B[i, j] = w
    return WeightedSem(B, np.ones(p) if D is None else np.asarray(D, float))


def example1():
    return sem(3, {(0, 1): 0.1, (0, 2): 1.0, (1, 2): 1.0})


def example2():
    return sem(4, {(0, 1): 1.0, (0, 2): 0.5, (1, 2): 1.0, (3, 1): 0.1})


def example3():
    w = {(0, 1): 0.15, (0, 2): 0.8, (1, 2): 1.0, (2, 3): 0.1, (0, 3): 0.3}
    return sem(4, w, [0.3, 0.4, 0.3, 0.4])


def four_node_example():
    return sem(4, {(0, 1): 0.1, (0, 2): 1.0, (1, 2): 1.0, (2, 3): 1.0})


def G(p, directed=(), undirected=()):
    return MixedGraph.from_edges(p, directed, undirected)


TRIANGLE = G(3, undirected=[(0, 1), (0, 2), (1, 2)])
COLLIDER = G(3, directed=[(0, 2), (1, 2)])
INFORMATIVE_3 = G(3, directed=[(0, 2), (1, 2)], undirected=[(0, 1)])
EX2_APDAG = G(4, directed=[(0, 1), (0, 2), (1, 2), (3, 1)])

EX3 = {
    "b": G(4, undirected=[(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]),
    "c": G(4, undirected=[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]),
    "d": G(4, directed=[(0, 2), (1, 2)], undirected=[(0, 3), (1, 3)]),
    "e": G(4, directed=[(0, 2), (1, 2)], undirected=[(0, 3)]),
    "f": G(4, directed=[(0, 2), (1, 2)]),
    "g": G(4, undirected=[(1, 2)]),
    "h": G(4, directed=[(0, 2), (1, 2)], undirected=[(0, 1), (0, 3), (2, 3)]),
    "i": G(4, directed=[(0, 2), (1, 2), (2, 3), (0, 3)], undirected=[(0, 1)]),
}


def all_dags(p):
    """Every labelled DAG on ``p`` vertices (543 for p = 4)."""
    pairs = list(itertools.combinations(range(p), 2))
    out = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = [(i, j) if s == 1 else (j, i) for (i, j), s in zip(pairs, states) if s]
        try:
            out.append(build_dag(p, edges))
        except ValueError:
            pass
    return out


@st.composite
def dags(draw, min_p=1, max_p=6):
    p = draw(st.integers(min_p, max_p))
    perm = draw(st.permutations(range(p)))
    edges = []
    for i, j in itertools.combinations(range(p), 2):
        if draw(st.booleans()):
            edges.append((perm[i], perm[j]))
    return Dag(MixedGraph.from_edges(p, edges).amat)


@st.composite
def weighted_sems(draw, min_p=2, max_p=5, density=0.6):
    """Random SEMs with generic weights bounded away from zero."""
    p = draw(st.integers(min_p, max_p))
    B = np.zeros((p, p))
    for i, j in itertools.combinations(range(p), 2):
        if draw(st.floats(0, 1)) < density:
            mag = draw(st.floats(0.2, 1.5))
            B[i, j] = mag if draw(st.booleans()) else -mag
    D = [draw(st.floats(0.5, 1.5)) for _ in range(p)]
    return WeightedSem(B, D)


# criterion number -> list of (clause, passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def record_criterion(n, clause, ok, detail=""):
    ACCEPTANCE_RESULTS.setdefault(n, []).append((clause, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'} criterion {n} [{clause}] {detail}")
