"""Strong-faithfulness diagnostics and the three-vertex region map.

``strong_faithful`` checks the classical condition over every triple
``(i, j, S)``; ``path_strong_faithfulness`` applies it along the solution
path; ``ages_strong_faithful`` restricts the triples to those GES actually
inspects.  All reports carry the smallest margin ``|rho| - delta`` seen on
a d-connected triple so callers can flag near-boundary cases.  A triple
whose ``|rho|`` is the very value that defined ``delta`` is an exact tie:
it violates the strict inequality and is not counted in the margin.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .aggregate import Apdag, ages_run, path_subdags, true_apdag
from .equivalence import DEFAULT_CLASS_CAP, consistent_extension, possible_parent_sets
from .ges import _graph_of, _state_of, backward_phase, forward_phase, solution_path
from .graph import Dag, MixedGraph, bits, d_separated
from .score import critical_lambda, delta_of_lambda
from .sem import CovarianceSource, WeightedSem, true_covariance

__all__ = [
    "Violation",
    "FaithfulnessReport",
    "RegionCell",
    "strong_faithful",
    "path_strong_faithfulness",
    "ages_strong_faithful",
    "region_map",
    "region_family",
    "INFORMATIVE",
    "UNINFORMATIVE",
    "WRONG_ONE",
    "WRONG_TWO",
    "MARGIN_TOL",
    "MAX_P",
]

MAX_P = 12
#: cells whose faithfulness margin is within this of zero are not classified
MARGIN_TOL = 1e-9

INFORMATIVE = MixedGraph.from_edges(3, [(0, 2), (1, 2)], [(0, 1)])
UNINFORMATIVE = MixedGraph.from_edges(3, [], [(0, 1), (0, 2), (1, 2)])
WRONG_ONE = MixedGraph.from_edges(3, [(0, 1), (2, 1)], [(0, 2)])
WRONG_TWO = MixedGraph.from_edges(3, [(1, 0), (2, 0)], [(1, 2)])


@dataclass(frozen=True)
class Violation:
    i: int
    j: int
    s: frozenset
    abs_rho: float
    delta: float


@dataclass
class FaithfulnessReport:
    violations: list = field(default_factory=list)
    min_margin: float = math.inf
    n_checked: int = 0
    exact_ties: int = 0

    @property
    def holds(self) -> bool:
        return not self.violations

    @property
    def near_boundary(self) -> bool:
        return abs(self.min_margin) < MARGIN_TOL

    def merge(self, other: "FaithfulnessReport") -> "FaithfulnessReport":
        return FaithfulnessReport(
            self.violations + other.violations,
            min(self.min_margin, other.min_margin),
            self.n_checked + other.n_checked,
            self.exact_ties + other.exact_ties,
        )


def _source(sigma) -> CovarianceSource:
    return sigma if isinstance(sigma, CovarianceSource) else CovarianceSource(sigma)


def _as_dag(g: MixedGraph) -> Dag:
    if isinstance(g, Dag):
        return g
    ext = consistent_extension(g)
    if ext is None:
        raise ValueError("graph has no consistent DAG extension")
    return ext


def _check(src, g, delta, triples, report):
    for i, j, smask in triples:
        s = frozenset(bits(smask))
        if d_separated(g, i, j, s):
            continue
        r = abs(src.pcorr(i, j, smask))
        report.n_checked += 1
        if r == delta:
            report.exact_ties += 1
        else:
            report.min_margin = min(report.min_margin, r - delta)
        if not r > delta:
            report.violations.append(Violation(min(i, j), max(i, j), s, r, delta))
    return report


def strong_faithful(sigma, g: MixedGraph, delta: float) -> FaithfulnessReport:
    """Check ``|rho(i, j | S)| > delta`` for every triple d-connected in ``g``."""
    src = _source(sigma)
    if g.p != src.p:
        raise ValueError(f"graph has {g.p} vertices, covariance {src.p}")
    if g.p > MAX_P:
        raise ValueError(f"exhaustive check refused for p={g.p} > {MAX_P}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    g = _as_dag(g)
    p = g.p
    full = (1 << p) - 1

    def triples():
        for i, j in itertools.combinations(range(p), 2):
            rest = full & ~(1 << i) & ~(1 << j)
            sub = rest
            while True:
                yield i, j, sub
                if sub == 0:
                    break
                sub = (sub - 1) & rest

    return _check(src, g, delta, triples(), FaithfulnessReport())


def path_strong_faithfulness(m: WeightedSem, path=None) -> FaithfulnessReport:
    """Strong faithfulness with respect to every path sub-DAG beyond the first."""
    src = true_covariance(m)
    if path is None:
        path = solution_path(src, 0.0)
    report = FaithfulnessReport()
    for k, g in path_subdags(m.dag, path):
        if k == 0:
            continue
        e = path[k]
        delta = e.rho if e.rho is not None else delta_of_lambda(e.lam)
        report = report.merge(strong_faithful(src, g, delta))
    return report


def ages_strong_faithful(
    sigma,
    g: MixedGraph,
    delta: float,
    cap: int = DEFAULT_CLASS_CAP,
    forward: Optional[MixedGraph] = None,
) -> FaithfulnessReport:
    """Strong faithfulness restricted to the triples GES examines at ``delta``.

    The first group comes from the forward-phase output: every possible
    parent set ``S`` of ``j`` with a non-adjacent non-descendant ``i`` in
    the witness DAG.  The second group is the conditioning sets of the
    backward-phase deletions.

    ``forward`` replaces the oracle forward-phase output by a given CPDAG,
    which lets the triple sets be inspected for a hypothetical search
    trajectory.  The backward phase is then started from it.
    """
    src = _source(sigma)
    g = _as_dag(g)
    if g.p != src.p:
        raise ValueError(f"graph has {g.p} vertices, covariance {src.p}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    lam = critical_lambda(delta)
    if forward is None:
        state, _ = forward_phase(src, lam)
        fwd = _graph_of(src.p, state)
    else:
        if forward.p != src.p:
            raise ValueError(f"forward graph has {forward.p} vertices, covariance {src.p}")
        fwd = forward
        state = _state_of(forward)
    triples = set()
    for j in range(src.p):
        for s, witness in possible_parent_sets(fwd, j, cap):
            desc = _descendants(witness, j)
            smask = sum(1 << v for v in s)
            for i in range(src.p):
                if i == j or witness.adjacent(i, j) or (desc >> i) & 1:
                    continue
                triples.add((i, j, smask))
    _, moves = backward_phase(src, lam, state)
    for mv in moves:
        triples.add((mv.i, mv.j, sum(1 << v for v in mv.conditioning)))
    return _check(src, g, delta, sorted(triples), FaithfulnessReport())


def _descendants(g: Dag, v: int) -> int:
    ch = g.masks[1]
    seen = 1 << v
    frontier = seen
    while frontier:
        nxt = 0
        for u in bits(frontier):
            nxt |= ch[u]
        frontier = nxt & ~seen
        seen |= frontier
    return seen


@dataclass(frozen=True)
class RegionCell:
    b13: float
    b23: float
    region: str
    a0: Apdag
    a_oracle: Apdag
    margin: float


def region_family(b13: float, b23: float, b12: float = 0.1) -> WeightedSem:
    """Three-vertex SEM ``X1 -> X2``, ``X1 -> X3``, ``X2 -> X3`` with unit noise."""
    B = np.zeros((3, 3))
    B[0, 1], B[0, 2], B[1, 2] = b12, b13, b23
    return WeightedSem(B, np.ones(3))


def _classify(args):
    b13, b23, b12 = args
    m = region_family(b13, b23, b12)
    src = true_covariance(m)
    path = solution_path(src, 0.0)
    a0 = true_apdag(m, path)
    a = ages_run(src, path=path).apdag
    report = path_strong_faithfulness(m, path)
    perfect = strong_faithful(src, m.dag, 0.0)
    if not perfect.holds or report.near_boundary:
        region = "Indeterminate"
    elif not report.holds:
        region = "Black"
    elif a0 == INFORMATIVE:
        region = "White"
    else:
        region = "Grey"
    return RegionCell(b13, b23, region, a0, a, report.min_margin)


def region_map(
    resolution: int = 81,
    weight_range: Sequence[float] = (-2.0, 2.0),
    b12: float = 0.1,
    jobs: Optional[int] = None,
) -> list[RegionCell]:
    """Classify a ``resolution x resolution`` grid of ``(b13, b23)`` weights.

    White: target is the informative APDAG and path strong faithfulness
    holds; Grey: it holds with any other target; Black: it fails;
    Indeterminate: the true DAG is not a perfect map (some d-connected
    pair has zero partial correlation) or the smallest margin is within
    ``MARGIN_TOL`` of zero.
    Cells are returned row-major with ``b13`` varying slowest.
    """
    if resolution < 1:
        raise ValueError(f"resolution must be positive, got {resolution}")
    lo, hi = weight_range
    axis = np.linspace(lo, hi, resolution) if resolution > 1 else np.array([lo])
    axis = [round(float(v), 12) + 0.0 for v in axis]
    args = [(x, y, b12) for x in axis for y in axis]
    jobs = jobs or int(os.environ.get("AGES_JOBS", "1"))
    if jobs <= 1:
        return [_classify(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_classify, args, chunksize=64))
