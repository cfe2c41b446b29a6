"""Markov equivalence: Meek closure, CPDAGs, consistent extensions, class enumeration.

Internally everything runs on per-vertex bitmasks (``pa[v]`` = directed
parents, ``ne[v]`` = undirected neighbours); the public functions wrap
these in graph objects.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

from .graph import Cpdag, Dag, MixedGraph, Pdag, bits, v_structures

__all__ = [
    "ClassTooLarge",
    "MeekStep",
    "meek_closure",
    "replay_meek_trace",
    "cpdag_of",
    "consistent_extension",
    "enumerate_markov_class",
    "possible_parent_sets",
    "same_markov_class",
    "DEFAULT_CLASS_CAP",
]

DEFAULT_CLASS_CAP = 10**6


class ClassTooLarge(RuntimeError):
    pass


class MeekStep(NamedTuple):
    rule: str
    edge: tuple[int, int]


def _children(p, pa):
    ch = [0] * p
    for v in range(p):
        for u in bits(pa[v]):
            ch[u] |= 1 << v
    return ch


def _meek_masks(p, pa, ne, trace=None):
    """Close ``(pa, ne)`` under R1-R4; returns new mask lists."""
    pa = list(pa)
    ne = list(ne)
    ch = _children(p, pa)
    adj = [pa[v] | ch[v] | ne[v] for v in range(p)]

    def r1(a, b):
        return pa[a] & ~adj[b] != 0

    def r2(a, b):
        return ch[a] & pa[b] != 0

    def r3(a, b):
        cand = list(bits(ne[a] & pa[b]))
        return any(not (adj[c] >> d) & 1 for c, d in itertools.combinations(cand, 2))

    def r4(a, b):
        for d in bits(ne[a] & ~adj[b] & ~(1 << b)):
            if ch[d] & pa[b] & adj[a]:
                return True
        return False

    rules = (("R1", r1), ("R2", r2), ("R3", r3), ("R4", r4))
    while True:
        fired = False
        for name, rule in rules:
            for x in range(p):
                for y in bits(ne[x] >> (x + 1) << (x + 1)):
                    for a, b in ((x, y), (y, x)):
                        if not (ne[a] >> b) & 1:
                            break
                        if rule(a, b):
                            ne[a] &= ~(1 << b)
                            ne[b] &= ~(1 << a)
                            pa[b] |= 1 << a
                            ch[a] |= 1 << b
                            if trace is not None:
                                trace.append(MeekStep(name, (a, b)))
                            fired = True
                            break
        if not fired:
            return pa, ne


def _graph_masks(g: MixedGraph):
    pa, _, ne, _ = g.masks
    return list(pa), list(ne)


def meek_closure(g: MixedGraph) -> tuple[Pdag, list[MeekStep]]:
    """Apply Meek's rules R1-R4 to a fixpoint.

    Rules are scanned in order R1..R4, each over the undirected edges in
    lexicographic order, until a full pass orients nothing.  The returned
    trace lists every orientation in the order it was made.
    """
    pa, ne = _graph_masks(g)
    trace: list[MeekStep] = []
    pa, ne = _meek_masks(g.p, pa, ne, trace)
    return Pdag(MixedGraph.from_masks(g.p, pa, ne).amat), trace


def replay_meek_trace(g: MixedGraph, trace) -> MixedGraph:
    a = g.amat.copy()
    for _, (i, j) in trace:
        a[j, i] = False
    return MixedGraph(a)


def _vstruct_masks(p, pa_dag):
    """Pattern of a DAG: skeleton with only v-structure edges directed."""
    ch_dag = _children(p, pa_dag)
    adj = [pa_dag[v] | ch_dag[v] for v in range(p)]
    pa = [0] * p
    for j in range(p):
        for i, k in itertools.combinations(list(bits(pa_dag[j])), 2):
            if not (adj[i] >> k) & 1:
                pa[j] |= (1 << i) | (1 << k)
    ch = _children(p, pa)
    ne = [adj[v] & ~pa[v] & ~ch[v] for v in range(p)]
    return pa, ne


def cpdag_masks(p, pa_dag):
    """CPDAG ``(pa, ne)`` masks of the DAG with parent masks ``pa_dag``."""
    pa, ne = _vstruct_masks(p, pa_dag)
    return _meek_masks(p, pa, ne)


def cpdag_of(g: Dag) -> Cpdag:
    pa, ne = cpdag_masks(g.p, g.masks[0])
    return Cpdag(MixedGraph.from_masks(g.p, pa, ne).amat)


def extension_masks(p, pa, ne):
    """Dor-Tarsi sink elimination.  Returns DAG parent masks or None."""
    pa = list(pa)
    ne = list(ne)
    ch = _children(p, pa)
    out_pa = list(pa)
    alive = (1 << p) - 1
    while alive:
        chosen = -1
        for x in bits(alive):
            if ch[x] & alive:
                continue
            adj_x = (pa[x] | ne[x]) & alive
            ok = True
            for y in bits(ne[x] & alive):
                adj_y = (pa[y] | ch[y] | ne[y]) & alive
                if (adj_x & ~(1 << y)) & ~adj_y:
                    ok = False
                    break
            if ok:
                chosen = x
                break
        if chosen < 0:
            return None
        x = chosen
        for y in bits(ne[x] & alive):
            out_pa[x] |= 1 << y
        alive &= ~(1 << x)
    return out_pa


def consistent_extension(g: MixedGraph):
    """A DAG extending ``g`` without new v-structures, or ``None`` if none exists."""
    pa, ne = _graph_masks(g)
    out = extension_masks(g.p, pa, ne)
    if out is None:
        return None
    return Dag(MixedGraph.from_masks(g.p, out, [0] * g.p).amat)


def _has_cycle(p, pa):
    indeg = [bin(m).count("1") for m in pa]
    ch = _children(p, pa)
    ready = [v for v in range(p) if indeg[v] == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for c in bits(ch[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return seen != p


def _vstructs_of_masks(p, pa, ne):
    adj = [pa[v] | ne[v] for v in range(p)]
    ch = _children(p, pa)
    for v in range(p):
        adj[v] |= ch[v]
    out = set()
    for j in range(p):
        for i, k in itertools.combinations(list(bits(pa[j])), 2):
            if not (adj[i] >> k) & 1:
                out.add((i, j, k))
    return out


def enumerate_markov_class(c: MixedGraph, cap: int = DEFAULT_CLASS_CAP) -> list[Dag]:
    """All DAGs with the skeleton and v-structures of ``c``.

    Each undirected edge is oriented both ways followed by Meek closure;
    branches that create a cycle or a new v-structure are pruned.
    """
    p = c.p
    target = v_structures(c)
    out: list[Dag] = []

    def first_undirected(ne):
        for x in range(p):
            m = ne[x] >> (x + 1) << (x + 1)
            if m:
                return x, (m & -m).bit_length() - 1
        return None

    def rec(pa, ne):
        edge = first_undirected(ne)
        if edge is None:
            if not _has_cycle(p, pa) and _vstructs_of_masks(p, pa, ne) == target:
                if len(out) >= cap:
                    raise ClassTooLarge(f"Markov class exceeds {cap} members")
                out.append(Dag(MixedGraph.from_masks(p, pa, [0] * p).amat))
            return
        x, y = edge
        for a, b in ((x, y), (y, x)):
            pa2, ne2 = list(pa), list(ne)
            ne2[a] &= ~(1 << b)
            ne2[b] &= ~(1 << a)
            pa2[b] |= 1 << a
            pa2, ne2 = _meek_masks(p, pa2, ne2)
            if _has_cycle(p, pa2):
                continue
            if not _vstructs_of_masks(p, pa2, ne2) <= target:
                continue
            rec(pa2, ne2)

    pa, ne = _graph_masks(c)
    rec(pa, ne)
    return out


def possible_parent_sets(c: MixedGraph, i: int, cap: int = DEFAULT_CLASS_CAP) -> list[tuple[frozenset[int], Dag]]:
    """Distinct parent sets of ``i`` over the class of ``c``, each with one witness DAG."""
    seen: dict[frozenset[int], Dag] = {}
    for g in enumerate_markov_class(c, cap):
        s = g.parents(i)
        if s not in seen:
            seen[s] = g
    return sorted(seen.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))


def same_markov_class(g1: Dag, g2: Dag) -> bool:
    if g1.p != g2.p:
        raise ValueError(f"vertex counts differ: {g1.p} vs {g2.p}")
    s1 = g1.amat | g1.amat.T
    s2 = g2.amat | g2.amat.T
    return bool((s1 == s2).all()) and v_structures(g1) == v_structures(g2)
