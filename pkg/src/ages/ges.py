"""Greedy equivalence search over CPDAGs and its solution path in the penalty.

Moves are generated with the Insert/Delete operators on CPDAGs (clique
and semi-directed-path validity conditions), so no equivalence class is
ever enumerated.  :func:`conceptual_ges_step` performs the same step the
slow way, by enumerating the class, and serves as a reference.

Greedy choice: the forward phase takes the insertion with the largest
``|rho|``, the backward phase the deletion with the smallest ``|rho|``.
Candidates within ``TIE_TOL`` of the best are ranked by ``(i, j)`` and
then by the resulting CPDAG, which makes both implementations agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .equivalence import (
    DEFAULT_CLASS_CAP,
    _children,
    cpdag_masks,
    enumerate_markov_class,
    extension_masks,
)
from .graph import Cpdag, MixedGraph, bits
from .score import (
    LAMBDA_RTOL,
    RHO_CLIP,
    bic_lambda,
    check_penalty,
    critical_lambda,
    deletion_improves,
    insertion_improves,
)
from .sem import CovarianceSource

__all__ = [
    "GesMove",
    "PathEntry",
    "SolutionPath",
    "ges_run",
    "forward_phase",
    "backward_phase",
    "conceptual_ges_step",
    "solution_path",
    "default_lambda_min",
    "TIE_TOL",
    "BREAK_MERGE_TOL",
]

TIE_TOL = 1e-10
BREAK_MERGE_TOL = 1e-12

INSERT = "Insert"
DELETE = "Delete"


@dataclass(frozen=True)
class GesMove:
    kind: str
    i: int
    j: int
    conditioning: frozenset
    rho: float
    score_delta: float
    result: Cpdag = field(repr=False, compare=False)


def _score_delta(kind, rho, lam):
    r = min(RHO_CLIP, abs(rho))
    half = 0.5 * math.log1p(-r * r)
    return half + lam if kind == INSERT else -half - lam


def _state_of(g: MixedGraph):
    pa, _, ne, _ = g.masks
    return tuple(pa), tuple(ne)


def _graph_of(p, state) -> Cpdag:
    pa, ne = state
    return Cpdag(MixedGraph.from_masks(p, pa, ne).amat)


def _is_clique(mask, adj):
    for v in bits(mask):
        if mask & ~adj[v] & ~(1 << v):
            return False
    return True


def _subsets(mask):
    """All submasks of ``mask``, smallest first."""
    sub = 0
    yield 0
    while True:
        sub = (sub - mask) & mask
        if sub == 0:
            return
        yield sub


def _semi_directed_reaches(start, target, out, blocked):
    """True iff a path ``start -> ... -> target`` following directed or undirected
    edges exists with no intermediate vertex in ``blocked``."""
    seen = 1 << start
    frontier = 1 << start
    while frontier:
        nxt = 0
        for v in bits(frontier):
            nxt |= out[v]
        if (nxt >> target) & 1:
            return True
        nxt &= ~seen & ~blocked
        seen |= nxt
        frontier = nxt
    return False


def _insert_candidates(src, p, pa, ne):
    """Valid Insert(x, y, T) operators as ``(|rho|, x, y, T, cond, rho)``."""
    ch = _children(p, pa)
    adj = [pa[v] | ch[v] | ne[v] for v in range(p)]
    out = [ch[v] | ne[v] for v in range(p)]
    cands = []
    for y in range(p):
        for x in range(p):
            if x == y or (adj[y] >> x) & 1:
                continue
            na = ne[y] & adj[x]
            if not _is_clique(na, adj):
                continue
            t0 = ne[y] & ~adj[x]
            free = not _semi_directed_reaches(y, x, out, na)
            for t in _subsets(t0):
                nat = na | t
                if t and not _is_clique(nat, adj):
                    continue
                if not free and _semi_directed_reaches(y, x, out, nat):
                    continue
                cond = nat | pa[y]
                rho = src.pcorr(x, y, cond)
                cands.append((abs(rho), x, y, t, cond, rho))
    return cands


def _apply_insert(p, pa, ne, x, y, t):
    pa = list(pa)
    ne = list(ne)
    pa[y] |= 1 << x
    for v in bits(t):
        ne[y] &= ~(1 << v)
        ne[v] &= ~(1 << y)
        pa[y] |= 1 << v
    dag = extension_masks(p, pa, ne)
    if dag is None:
        raise AssertionError("valid Insert produced a non-extendible PDAG")
    new_pa, new_ne = cpdag_masks(p, dag)
    return tuple(new_pa), tuple(new_ne)


def _delete_candidates(src, p, pa, ne):
    """Valid Delete(x, y, H) operators as ``(|rho|, x, y, H, cond, rho)``."""
    ch = _children(p, pa)
    adj = [pa[v] | ch[v] | ne[v] for v in range(p)]
    cands = []
    for y in range(p):
        for x in bits(pa[y] | ne[y]):
            na = ne[y] & adj[x]
            base = pa[y] & ~(1 << x)
            for h in _subsets(na):
                rest = na & ~h
                if not _is_clique(rest, adj):
                    continue
                cond = rest | base
                rho = src.pcorr(x, y, cond)
                cands.append((abs(rho), x, y, h, cond, rho))
    return cands


def _apply_delete(p, pa, ne, x, y, h):
    pa = list(pa)
    ne = list(ne)
    pa[y] &= ~(1 << x)
    ne[y] &= ~(1 << x)
    ne[x] &= ~(1 << y)
    for v in bits(h):
        ne[y] &= ~(1 << v)
        ne[v] &= ~(1 << y)
        pa[v] |= 1 << y
        if (ne[x] >> v) & 1:
            ne[x] &= ~(1 << v)
            ne[v] &= ~(1 << x)
            pa[v] |= 1 << x
    dag = extension_masks(p, pa, ne)
    if dag is None:
        raise AssertionError("valid Delete produced a non-extendible PDAG")
    new_pa, new_ne = cpdag_masks(p, dag)
    return tuple(new_pa), tuple(new_ne)


def _pick(cands, best_of, apply):
    """Choose among ``(|rho|, i, j, extra, cond, rho)`` tuples.

    ``best_of`` is ``max`` or ``min`` over ``|rho|``; ``apply(cand)`` returns
    the resulting state and is only called to break ties on ``(i, j)``.
    """
    if not cands:
        return None, None
    best = best_of(c[0] for c in cands)
    tied = [c for c in cands if abs(c[0] - best) <= TIE_TOL]
    ij = min((c[1], c[2]) for c in tied)
    tied = [c for c in tied if (c[1], c[2]) == ij]
    if len(tied) == 1:
        return tied[0], apply(tied[0])
    scored = [(apply(c), c) for c in tied]
    scored.sort(key=lambda sc: sc[0])
    return scored[0][1], scored[0][0]


def _best_insert(src, p, state):
    pa, ne = state
    cand, new_state = _pick(
        _insert_candidates(src, p, pa, ne), max, lambda c: _apply_insert(p, pa, ne, c[1], c[2], c[3])
    )
    return cand, new_state


def _best_delete(src, p, state):
    pa, ne = state
    cand, new_state = _pick(
        _delete_candidates(src, p, pa, ne), min, lambda c: _apply_delete(p, pa, ne, c[1], c[2], c[3])
    )
    return cand, new_state


def _move(kind, p, cand, new_state, lam):
    _, x, y, _, cond, rho = cand
    return GesMove(kind, x, y, frozenset(bits(cond)), rho, _score_delta(kind, rho, lam), _graph_of(p, new_state))


def _empty_state(p):
    return (0,) * p, (0,) * p


def forward_phase(src: CovarianceSource, lam: float, start: Optional[MixedGraph] = None):
    """Run insertions while they improve the score; returns ``(state, moves)``."""
    p = src.p
    state = _empty_state(p) if start is None else _state_of(start)
    moves = []
    while True:
        cand, new_state = _best_insert(src, p, state)
        if cand is None or not insertion_improves(cand[5], lam):
            return state, moves
        moves.append(_move(INSERT, p, cand, new_state, lam))
        state = new_state


def backward_phase(src: CovarianceSource, lam: float, start):
    p = src.p
    state = start if isinstance(start, tuple) else _state_of(start)
    moves = []
    while True:
        cand, new_state = _best_delete(src, p, state)
        if cand is None or not deletion_improves(cand[5], lam):
            return state, moves
        moves.append(_move(DELETE, p, cand, new_state, lam))
        state = new_state


def default_lambda_min(src: CovarianceSource) -> float:
    return 0.0 if src.oracle else bic_lambda(src.n)


def ges_run(src: CovarianceSource, lam: Optional[float] = None) -> tuple[Cpdag, list[GesMove]]:
    """GES from the empty graph; returns the final CPDAG and the move log."""
    lam = default_lambda_min(src) if lam is None else check_penalty(lam, src.n)
    state, fwd = forward_phase(src, lam)
    state, bwd = backward_phase(src, lam, state)
    return _graph_of(src.p, state), fwd + bwd


def conceptual_ges_step(src: CovarianceSource, c: MixedGraph, lam: float, kind: str, cap: int = DEFAULT_CLASS_CAP):
    """One GES move computed by enumerating every DAG in the class of ``c``.

    Returns the chosen :class:`GesMove`, or ``None`` when no move of
    ``kind`` improves the score.
    """
    if kind not in (INSERT, DELETE):
        raise ValueError(f"kind must be {INSERT!r} or {DELETE!r}")
    p = c.p
    cands = []
    for g in enumerate_markov_class(c, cap):
        pa = list(g.masks[0])
        ch = list(g.masks[1])
        if kind == INSERT:
            desc = []
            for v in range(p):
                d = 1 << v
                frontier = d
                while frontier:
                    nxt = 0
                    for u in bits(frontier):
                        nxt |= ch[u]
                    frontier = nxt & ~d
                    d |= frontier
                desc.append(d)
            for j in range(p):
                for i in range(p):
                    if i == j or (pa[j] >> i) & 1 or (pa[i] >> j) & 1:
                        continue
                    if (desc[j] >> i) & 1:
                        continue
                    rho = src.pcorr(i, j, pa[j])
                    cands.append((abs(rho), i, j, tuple(pa), pa[j], rho))
        else:
            for j in range(p):
                for i in bits(pa[j]):
                    cond = pa[j] & ~(1 << i)
                    rho = src.pcorr(i, j, cond)
                    cands.append((abs(rho), i, j, tuple(pa), cond, rho))

    def apply(cand):
        _, i, j, dag_pa, _, _ = cand
        new = list(dag_pa)
        if kind == INSERT:
            new[j] |= 1 << i
        else:
            new[j] &= ~(1 << i)
        new_pa, new_ne = cpdag_masks(p, new)
        return tuple(new_pa), tuple(new_ne)

    cand, new_state = _pick(cands, max if kind == INSERT else min, apply)
    if cand is None:
        return None
    improves = insertion_improves if kind == INSERT else deletion_improves
    if not improves(cand[5], lam):
        return None
    return _move(kind, p, cand, new_state, lam)


@dataclass(frozen=True)
class PathEntry:
    """``lam`` is the lower end of the entry's penalty interval; ``rho`` is
    the partial correlation whose critical penalty equals ``lam`` (``None``
    for the entry at the path minimum).

    Intervals opened by an insertion breakpoint contain ``lam``.  In
    ``"exact"`` mode an interval opened by a backward deletion does not:
    at ``lam`` itself the deletion is not yet an improvement.
    """

    lam: float
    cpdag: Cpdag
    rho: Optional[float] = field(default=None, compare=False)


@dataclass
class SolutionPath:
    """GES outputs ordered by increasing penalty.

    ``entries[k].lam`` is the smallest penalty producing ``entries[k].cpdag``.
    ``forward`` keeps every distinct forward-phase output with the lower
    end of its penalty interval.
    """

    entries: list
    lambda_min: float
    forward: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    @property
    def lambdas(self):
        return [e.lam for e in self.entries]

    @property
    def cpdags(self):
        return [e.cpdag for e in self.entries]

    def at(self, lam: float) -> Cpdag:
        """The path CPDAG whose interval contains ``lam``."""
        chosen = None
        for e in self.entries:
            if e.lam <= lam * (1 + LAMBDA_RTOL) + BREAK_MERGE_TOL:
                chosen = e
        if chosen is None:
            raise ValueError(f"lambda={lam} is below the path minimum {self.lambda_min}")
        return chosen.cpdag


def _forward_intervals(src, lambda_min):
    """Distinct forward outputs as ``(lower, upper, state, rho)`` from the largest penalty down.

    ``rho`` is the ``|rho|`` defining ``lower``, or ``None`` when ``lower``
    is ``lambda_min``.
    """
    p = src.p
    state, moves = forward_phase(src, lambda_min)
    states = [_empty_state(p)] + [_state_of(m.result) for m in moves]
    running = [(math.inf, None)]
    for m in moves:
        r = min(RHO_CLIP, abs(m.rho))
        c = critical_lambda(r)
        running.append(min(running[-1], (c, r), key=lambda t: t[0]))
    out = []
    for m in range(len(states)):
        upper = running[m][0]
        lower, rho = running[m + 1] if m + 1 < len(running) else (lambda_min, None)
        if lower <= lambda_min:
            lower, rho = lambda_min, None
        if upper - lower <= BREAK_MERGE_TOL:
            continue
        out.append((lower, upper, states[m], rho))
    return out


def _exact_backward(src, lower, upper, state, rho):
    """Every backward output for penalties in ``[lower, upper)``."""
    p = src.p
    results = [(lower, backward_phase(src, lower, state)[0], rho)]
    seq = []
    cur = state
    while True:
        cand, new_state = _best_delete(src, p, cur)
        if cand is None:
            break
        r = min(RHO_CLIP, abs(cand[5]))
        seq.append((critical_lambda(r), r))
        cur = new_state
    running = (-math.inf, None)
    for d, r in seq:
        if d > running[0]:
            running = (d, r)
        if running[0] >= upper:
            break
        if running[0] > lower + BREAK_MERGE_TOL:
            lam = running[0]
            results.append((lam, backward_phase(src, lam * (1 + 2 * LAMBDA_RTOL), state)[0], running[1]))
    return results


def solution_path(src: CovarianceSource, lambda_min: Optional[float] = None, backward: str = "lower") -> SolutionPath:
    """All GES outputs for penalties ``>= lambda_min`` from one forward run.

    The forward phase is run once at ``lambda_min``; its outputs for larger
    penalties are prefixes of that run.  Each distinct forward output gets a
    backward phase at the lower end of its interval (``backward="lower"``).
    ``backward="exact"`` also tracks backward-phase changes inside an
    interval.
    """
    lambda_min = default_lambda_min(src) if lambda_min is None else check_penalty(lambda_min, src.n)
    if backward not in ("lower", "exact"):
        raise ValueError(f"unknown backward mode {backward!r}")
    p = src.p
    intervals = _forward_intervals(src, lambda_min)
    raw = []
    forward = []
    for lower, upper, state, rho in intervals:
        forward.append(PathEntry(lower, _graph_of(p, state), rho))
        if backward == "lower":
            raw.append((lower, backward_phase(src, lower, state)[0], rho))
        else:
            raw.extend(_exact_backward(src, lower, upper, state, rho))
    raw.sort(key=lambda t: t[0])
    entries = []
    seen = set()
    for lam, state, rho in raw:
        if state in seen:
            continue
        if entries and lam - entries[-1].lam <= BREAK_MERGE_TOL:
            continue
        seen.add(state)
        entries.append(PathEntry(lam, _graph_of(p, state), rho))
    forward.sort(key=lambda e: e.lam)
    return SolutionPath(entries, lambda_min, forward)
