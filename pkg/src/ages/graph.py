"""Mixed graphs over integer vertices, structural queries and d-separation.

A graph on ``p`` vertices is stored as a read-only boolean mark matrix
``amat`` with the convention

* ``i -> j``  : ``amat[i, j]`` and not ``amat[j, i]``
* ``i -- j``  : ``amat[i, j]`` and ``amat[j, i]``
* absent      : neither

so every vertex pair carries at most one edge and the skeleton is
``amat | amat.T``.  Graphs never change after construction.
"""

from __future__ import annotations

import itertools
from collections import deque
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "GraphError",
    "CycleError",
    "RangeError",
    "PreconditionError",
    "MixedGraph",
    "Pdag",
    "Dag",
    "Cpdag",
    "build_dag",
    "skeleton",
    "directed_part",
    "restrict_to_skeleton",
    "v_structures",
    "d_separated",
    "d_separated_bruteforce",
    "is_subskeleton",
    "topological_order",
    "bits",
]


class GraphError(ValueError):
    """Base class for malformed graph input."""


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("directed cycle " + " -> ".join(map(str, self.cycle)))


class RangeError(GraphError):
    pass


class PreconditionError(GraphError):
    pass


def bits(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _mask(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


class MixedGraph:
    """Immutable graph with directed and undirected edges.

    Equality and hashing only look at ``p`` and the edge marks, so a
    ``Dag`` and a ``MixedGraph`` with the same edges compare equal.
    """

    __slots__ = ("p", "amat", "_key", "_masks")

    def __init__(self, amat):
        a = np.array(amat, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"mark matrix must be square, got shape {a.shape}")
        if a.diagonal().any():
            raise GraphError("self-loops are not allowed")
        a.setflags(write=False)
        self.p = a.shape[0]
        self.amat = a
        self._key = None
        self._masks = None
        self._validate()

    def _validate(self):
        pass

    # construction helpers

    @classmethod
    def empty(cls, p: int):
        return cls(np.zeros((p, p), dtype=bool))

    @classmethod
    def from_edges(cls, p: int, directed: Iterable[Sequence[int]] = (), undirected: Iterable[Sequence[int]] = ()):
        if p < 0:
            raise RangeError(f"vertex count must be nonnegative, got {p}")
        a = np.zeros((p, p), dtype=bool)
        seen = set()
        for kind, edges in (("directed", directed), ("undirected", undirected)):
            for i, j in edges:
                i, j = int(i), int(j)
                if not (0 <= i < p and 0 <= j < p):
                    raise RangeError(f"edge ({i}, {j}) out of range for p={p}")
                if i == j:
                    raise GraphError(f"self-loop at {i}")
                pair = (min(i, j), max(i, j))
                if pair in seen:
                    raise GraphError(f"duplicate edge between {pair[0]} and {pair[1]}")
                seen.add(pair)
                a[i, j] = True
                if kind == "undirected":
                    a[j, i] = True
        return cls(a)

    @classmethod
    def from_masks(cls, p: int, pa: Sequence[int], ne: Sequence[int]):
        """Build from per-vertex parent and undirected-neighbour bitmasks."""
        a = np.zeros((p, p), dtype=bool)
        for j in range(p):
            for i in bits(pa[j]):
                a[i, j] = True
            for i in bits(ne[j]):
                a[i, j] = True
                a[j, i] = True
        return cls(a)

    def as_role(self, cls):
        """Re-wrap the same edges under another graph role (validating it)."""
        return cls(self.amat)

    # queries

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = np.packbits(self.amat).tobytes() + self.p.to_bytes(4, "little")
        return self._key

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self.p == other.p and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        parts = [f"{i}->{j}" for i, j in self.directed_edges()]
        parts += [f"{i}--{j}" for i, j in self.undirected_edges()]
        return f"{type(self).__name__}(p={self.p}, [{', '.join(parts)}])"

    @property
    def masks(self):
        """Per-vertex bitmasks ``(pa, ch, ne, adj)``; computed once."""
        if self._masks is None:
            a = self.amat
            p = self.p
            pa, ch, ne, adj = [0] * p, [0] * p, [0] * p, [0] * p
            for i, j in zip(*np.nonzero(a)):
                i, j = int(i), int(j)
                if a[j, i]:
                    ne[j] |= 1 << i
                else:
                    pa[j] |= 1 << i
                    ch[i] |= 1 << j
                adj[j] |= 1 << i
                adj[i] |= 1 << j
            self._masks = (tuple(pa), tuple(ch), tuple(ne), tuple(adj))
        return self._masks

    def directed_edges(self) -> list[tuple[int, int]]:
        a = self.amat
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(a & ~a.T))]

    def undirected_edges(self) -> list[tuple[int, int]]:
        a = self.amat
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(a & a.T)))]

    def adjacent_pairs(self) -> list[tuple[int, int]]:
        a = self.amat
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(a | a.T)))]

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.amat | self.amat.T).sum())

    def adjacent(self, i: int, j: int) -> bool:
        return bool(self.amat[i, j] or self.amat[j, i])

    def is_directed(self, i: int, j: int) -> bool:
        """True iff the edge ``i -> j`` is present."""
        return bool(self.amat[i, j] and not self.amat[j, i])

    def is_undirected(self, i: int, j: int) -> bool:
        return bool(self.amat[i, j] and self.amat[j, i])

    def edge_state(self, i: int, j: int) -> str:
        """One of ``"absent"``, ``"forward"`` (i->j), ``"backward"`` (j->i), ``"undirected"``."""
        a, b = bool(self.amat[i, j]), bool(self.amat[j, i])
        if a and b:
            return "undirected"
        if a:
            return "forward"
        if b:
            return "backward"
        return "absent"

    def parents(self, j: int) -> frozenset[int]:
        return frozenset(bits(self.masks[0][j]))

    def children(self, i: int) -> frozenset[int]:
        return frozenset(bits(self.masks[1][i]))

    def neighbors(self, i: int) -> frozenset[int]:
        """Vertices joined to ``i`` by an undirected edge."""
        return frozenset(bits(self.masks[2][i]))

    def adjacents(self, i: int) -> frozenset[int]:
        return frozenset(bits(self.masks[3][i]))

    def has_directed_cycle(self) -> bool:
        return _directed_cycle(self.p, self.masks[1]) is not None


def _directed_cycle(p: int, ch: Sequence[int]):
    """Return a directed cycle as a vertex list, or None."""
    color = [0] * p
    stack_parent = [-1] * p
    for root in range(p):
        if color[root]:
            continue
        stack = [(root, iter(bits(ch[root])))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[v] = 2
                stack.pop()
                continue
            if color[nxt] == 1:
                cycle = [nxt]
                u = v
                while u != nxt:
                    cycle.append(u)
                    u = stack_parent[u]
                cycle.append(nxt)
                return cycle[::-1]
            if color[nxt] == 0:
                color[nxt] = 1
                stack_parent[nxt] = v
                stack.append((nxt, iter(bits(ch[nxt]))))
    return None


class Pdag(MixedGraph):
    """Mixed graph whose directed edges form no directed cycle."""

    __slots__ = ()

    def _validate(self):
        cycle = _directed_cycle(self.p, self.masks[1])
        if cycle is not None:
            raise CycleError(cycle)


class Dag(Pdag):
    __slots__ = ()

    def _validate(self):
        a = self.amat
        if (a & a.T).any():
            raise GraphError("a DAG cannot contain undirected edges")
        super()._validate()


class Cpdag(Pdag):
    """PDAG representing a Markov equivalence class.

    Only the equivalence module should construct these; the constructor
    checks acyclicity but not completeness.
    """

    __slots__ = ()


def topological_order(g: MixedGraph) -> list[int]:
    """Topological order of the directed part (Kahn, smallest index first)."""
    pa, ch = g.masks[0], g.masks[1]
    indeg = [bin(m).count("1") for m in pa]
    ready = [v for v in range(g.p) if indeg[v] == 0]
    order = []
    while ready:
        ready.sort()
        v = ready.pop(0)
        order.append(v)
        for c in bits(ch[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != g.p:
        raise CycleError(_directed_cycle(g.p, ch) or [])
    return order


def build_dag(p: int, directed_edges: Iterable[Sequence[int]]) -> Dag:
    """Build a :class:`Dag`, raising ``CycleError`` or ``RangeError`` on bad input."""
    g = MixedGraph.from_edges(p, directed=directed_edges)
    return Dag(g.amat)


def skeleton(g: MixedGraph) -> MixedGraph:
    a = g.amat | g.amat.T
    return MixedGraph(a)


def directed_part(g: MixedGraph) -> MixedGraph:
    a = g.amat & ~g.amat.T
    return MixedGraph(a)


def is_subskeleton(small: MixedGraph, big: MixedGraph) -> bool:
    """True iff every adjacency of ``small`` is an adjacency of ``big``."""
    s = small.amat | small.amat.T
    b = big.amat | big.amat.T
    return bool(not (s & ~b).any())


def restrict_to_skeleton(g: Dag, h: MixedGraph) -> Dag:
    """Drop from ``g`` every adjacency absent in ``h``, keeping ``g``'s orientations."""
    if g.p != h.p:
        raise PreconditionError(f"vertex counts differ: {g.p} vs {h.p}")
    keep = h.amat | h.amat.T
    return Dag(g.amat & keep)


def v_structures(g: MixedGraph) -> set[tuple[int, int, int]]:
    """All ``(i, j, k)`` with ``i -> j <- k``, ``i < k`` and ``i``, ``k`` non-adjacent."""
    pa, _, _, adj = g.masks
    out = set()
    for j in range(g.p):
        parents = list(bits(pa[j]))
        for i, k in itertools.combinations(parents, 2):
            if not (adj[i] >> k) & 1:
                out.add((i, j, k))
    return out


def _check_query(g: MixedGraph, i: int, j: int, s) -> frozenset[int]:
    s = frozenset(int(v) for v in s)
    for v in (i, j, *s):
        if not 0 <= v < g.p:
            raise RangeError(f"vertex {v} out of range for p={g.p}")
    if i == j:
        raise PreconditionError("d-separation query needs two distinct vertices")
    if i in s or j in s:
        raise PreconditionError(f"conditioning set {sorted(s)} contains a queried vertex")
    return s


def d_separated(g: Dag, i: int, j: int, s: Iterable[int] = ()) -> bool:
    """d-separation via the moralized ancestral graph of ``{i, j} | s``."""
    s = _check_query(g, i, j, s)
    pa = g.masks[0]
    anc = _mask([i, j, *s])
    frontier = anc
    while frontier:
        new = 0
        for v in bits(frontier):
            new |= pa[v]
        frontier = new & ~anc
        anc |= frontier
    # moralize: undirected links child-parent and between co-parents
    p = g.p
    nb = [0] * p
    for v in bits(anc):
        pv = pa[v] & anc
        nb[v] |= pv
        for u in bits(pv):
            nb[u] |= (1 << v) | (pv & ~(1 << u))
    blocked = _mask(s)
    seen = 1 << i
    queue = deque([i])
    while queue:
        v = queue.popleft()
        nxt = nb[v] & ~seen & ~blocked
        if (nxt >> j) & 1:
            return False
        seen |= nxt
        queue.extend(bits(nxt))
    return True


def d_separated_bruteforce(g: Dag, i: int, j: int, s: Iterable[int] = ()) -> bool:
    """Literal definition: enumerate every simple path and test whether it is blocked."""
    s = _check_query(g, i, j, s)
    pa, ch, _, adj = g.masks
    desc = []
    for v in range(g.p):
        d = 1 << v
        frontier = d
        while frontier:
            new = 0
            for u in bits(frontier):
                new |= ch[u]
            frontier = new & ~d
            d |= frontier
        desc.append(d)
    smask = _mask(s)

    def blocked(path):
        for k in range(1, len(path) - 1):
            a, b, c = path[k - 1], path[k], path[k + 1]
            collider = (pa[b] >> a) & 1 and (pa[b] >> c) & 1
            if collider:
                if not desc[b] & smask:
                    return True
            elif b in s:
                return True
        return False

    def paths(v, visited, path):
        if v == j:
            yield list(path)
            return
        for u in bits(adj[v] & ~visited):
            path.append(u)
            yield from paths(u, visited | (1 << u), path)
            path.pop()

    return all(blocked(path) for path in paths(i, 1 << i, [i]))
