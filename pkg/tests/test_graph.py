import itertools
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ages.graph import (
    CycleError,
    Dag,
    GraphError,
    MixedGraph,
    Pdag,
    PreconditionError,
    RangeError,
    build_dag,
    d_separated,
    d_separated_bruteforce,
    directed_part,
    is_subskeleton,
    restrict_to_skeleton,
    skeleton,
    topological_order,
    v_structures,
)
from helpers import INFORMATIVE_3, EX3, G, TRIANGLE, dags, example2, example3


class TestConstruction:
    def test_example1_shape_is_a_dag(self):
        g = build_dag(3, [(0, 1), (0, 2), (1, 2)])
        assert isinstance(g, Dag)
        assert g.directed_edges() == [(0, 1), (0, 2), (1, 2)]

    def test_single_vertex(self):
        g = build_dag(1, [])
        assert g.p == 1 and g.n_edges == 0

    def test_two_cycle_rejected(self):
        with pytest.raises(GraphError):
            build_dag(2, [(0, 1), (1, 0)])

    def test_three_cycle_reports_cycle(self):
        with pytest.raises(CycleError) as exc:
            build_dag(3, [(0, 1), (1, 2), (2, 0)])
        assert sorted(exc.value.cycle[:3]) == [0, 1, 2]

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            build_dag(2, [(0, 2)])

    def test_self_loop(self):
        with pytest.raises(GraphError):
            MixedGraph.from_edges(2, [(1, 1)])

    def test_dag_rejects_undirected(self):
        with pytest.raises(GraphError):
            Dag(G(2, undirected=[(0, 1)]).amat)

    def test_pdag_rejects_directed_cycle(self):
        with pytest.raises(CycleError):
            Pdag(G(3, directed=[(0, 1), (1, 2), (2, 0)]).amat)

    def test_mixed_graph_allows_cycle(self):
        assert G(2, directed=[(0, 1)]).has_directed_cycle() is False
        assert MixedGraph(np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], bool)).has_directed_cycle()

    def test_amat_read_only(self):
        g = INFORMATIVE_3
        with pytest.raises(ValueError):
            g.amat[0, 1] = False

    def test_edge_states(self):
        g = INFORMATIVE_3
        assert g.edge_state(0, 2) == "forward"
        assert g.edge_state(2, 0) == "backward"
        assert g.edge_state(0, 1) == "undirected"
        assert G(2).edge_state(0, 1) == "absent"
        assert g.parents(2) == {0, 1}
        assert g.neighbors(0) == {1}
        assert g.adjacents(0) == {1, 2}

    def test_equality_ignores_role(self):
        g = build_dag(2, [(0, 1)])
        assert g == G(2, [(0, 1)])
        assert hash(g) == hash(G(2, [(0, 1)]))
        assert g != G(2, [(1, 0)])
        assert G(2) != G(3)


class TestQueries:
    def test_skeleton_example1(self):
        assert skeleton(build_dag(3, [(0, 1), (0, 2), (1, 2)])) == TRIANGLE

    def test_skeleton_empty(self):
        assert skeleton(G(3)) == G(3)

    def test_skeleton_fig3a(self):
        assert skeleton(example3().dag) == EX3["b"]

    def test_directed_part(self):
        assert directed_part(INFORMATIVE_3) == G(3, [(0, 2), (1, 2)])
        assert directed_part(TRIANGLE) == G(3)
        assert directed_part(EX3["i"]).directed_edges() == [(0, 2), (0, 3), (1, 2), (2, 3)]

    def test_restrict_fig3e(self):
        h = skeleton(EX3["e"])
        assert restrict_to_skeleton(example3().dag, h) == G(4, [(0, 2), (1, 2), (0, 3)])

    def test_restrict_identity_and_empty(self):
        g = example3().dag
        assert restrict_to_skeleton(g, skeleton(g)) == g
        assert restrict_to_skeleton(g, G(4)) == G(4)

    def test_restrict_size_mismatch(self):
        with pytest.raises(PreconditionError):
            restrict_to_skeleton(example3().dag, G(3))

    def test_v_structures(self):
        assert v_structures(G(4, [(0, 2), (1, 2), (0, 3)])) == {(0, 2, 1)}
        assert v_structures(build_dag(3, [(0, 1), (0, 2), (1, 2)])) == set()

    def test_v_structures_fig2a_bruteforce(self):
        g = example2().dag
        expected = {
            (i, j, k)
            for j in range(4)
            for i, k in itertools.combinations(range(4), 2)
            if j not in (i, k) and g.is_directed(i, j) and g.is_directed(k, j) and not g.adjacent(i, k)
        }
        found = {(i, j, k) for i, j, k in v_structures(g)}
        assert {(i, j, k) if i < k else (k, j, i) for i, j, k in expected} == found
        # X1 -> X2 <- X4 is the only pair of non-adjacent parents
        assert found == {(0, 1, 3)}

    def test_topological_order(self):
        assert topological_order(example3().dag) == [0, 1, 2, 3]
        cyclic = MixedGraph(np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], bool))
        with pytest.raises(CycleError):
            topological_order(cyclic)

    def test_subskeleton(self):
        assert is_subskeleton(EX3["e"], EX3["b"])
        assert not is_subskeleton(EX3["c"], EX3["b"])


class TestDSeparation:
    def test_chain(self):
        g = build_dag(3, [(0, 1), (1, 2)])
        assert d_separated(g, 0, 2, {1})
        assert not d_separated(g, 0, 2, set())

    def test_collider(self):
        g = build_dag(3, [(0, 2), (1, 2)])
        assert d_separated(g, 0, 1, set())
        assert not d_separated(g, 0, 1, {2})

    def test_collider_descendant_opens(self):
        g = build_dag(4, [(0, 2), (1, 2), (2, 3)])
        assert not d_separated(g, 0, 1, {3})

    def test_fig3a_against_bruteforce(self):
        g = example3().dag
        assert d_separated(g, 1, 3, {0, 2}) == d_separated_bruteforce(g, 1, 3, {0, 2})
        assert d_separated(g, 1, 3, {0, 2})

    def test_query_preconditions(self):
        g = build_dag(3, [(0, 1)])
        for fn in (d_separated, d_separated_bruteforce):
            with pytest.raises(PreconditionError):
                fn(g, 0, 1, {0})
            with pytest.raises(PreconditionError):
                fn(g, 1, 1, set())
            with pytest.raises(RangeError):
                fn(g, 0, 5, set())

    def test_bulk_random_queries_agree(self):
        rng = random.Random(3)
        n = 0
        while n < 2000:
            p = rng.randint(2, 6)
            perm = list(range(p))
            rng.shuffle(perm)
            edges = [(perm[i], perm[j]) for i, j in itertools.combinations(range(p), 2) if rng.random() < 0.5]
            g = build_dag(p, edges)
            for _ in range(10):
                i, j = rng.sample(range(p), 2)
                s = {v for v in range(p) if v not in (i, j) and rng.random() < 0.4}
                assert d_separated(g, i, j, s) == d_separated_bruteforce(g, i, j, s)
                n += 1


@given(dags(), st.data())
def test_dsep_matches_bruteforce(g, data):
    if g.p < 2:
        return
    i, j = data.draw(st.lists(st.integers(0, g.p - 1), min_size=2, max_size=2, unique=True))
    s = data.draw(st.sets(st.sampled_from([v for v in range(g.p) if v not in (i, j)]) if g.p > 2 else st.nothing()))
    assert d_separated(g, i, j, s) == d_separated_bruteforce(g, i, j, s)


@given(dags())
def test_skeleton_of_directed_part_is_contained(g):
    assert is_subskeleton(skeleton(directed_part(g)), skeleton(g))


@given(dags(), st.data())
def test_restriction_is_subdag(g, data):
    keep = [e for e in g.adjacent_pairs() if data.draw(st.booleans())]
    h = G(g.p, undirected=keep)
    r = restrict_to_skeleton(g, h)
    assert isinstance(r, Dag)
    assert set(r.directed_edges()) <= set(g.directed_edges())
    assert skeleton(r) == skeleton(h)


@given(dags(), st.data())
def test_v_structures_permutation_equivariant(g, data):
    perm = data.draw(st.permutations(range(g.p)))
    relabelled = build_dag(g.p, [(perm[i], perm[j]) for i, j in g.directed_edges()])
    inv = {perm[v]: v for v in range(g.p)}
    back = {tuple(sorted((inv[i], inv[k]))) + (inv[j],) for i, j, k in v_structures(relabelled)}
    assert back == {(i, k, j) for i, j, k in v_structures(g)}


@given(st.integers(1, 5), st.data())
def test_build_dag_accepts_exactly_acyclic_edge_sets(p, data):
    pairs = list(itertools.permutations(range(p), 2))
    chosen = data.draw(st.sets(st.sampled_from(pairs)) if pairs else st.just(set()))
    chosen = {e for e in chosen if (e[1], e[0]) not in chosen or e < (e[1], e[0])}
    m = MixedGraph.from_edges(p, sorted(chosen))
    try:
        build_dag(p, sorted(chosen))
        accepted = True
    except CycleError:
        accepted = False
    assert accepted == (not m.has_directed_cycle())
