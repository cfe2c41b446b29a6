"""Aggregation of CPDAGs along a GES solution path into an APDAG.

The oracle and sample estimators (:func:`ages_run`) and the theoretical
target built from the true DAG (:func:`true_apdag`) share one aggregation
routine.  Every directed edge of the result remembers where its
orientation came from: the index of the contributing path CPDAG, or
``"meek"`` for orientations added by the final closure.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

from .equivalence import _meek_masks, cpdag_of, extension_masks
from .ges import SolutionPath, solution_path
from .graph import Dag, MixedGraph, Pdag, bits, is_subskeleton, restrict_to_skeleton, skeleton
from .sem import CovarianceSource, WeightedSem, true_covariance

__all__ = [
    "Apdag",
    "AgesResult",
    "aggregate_cpdags",
    "ages_run",
    "true_apdag",
    "kept_indices",
    "path_subdags",
]

MEEK = "meek"


class Apdag(Pdag):
    """A PDAG with orientation provenance.

    ``provenance`` maps each directed edge ``(i, j)`` to the origin label of
    the CPDAG that oriented it, or ``"meek"``.
    ``conflicts`` counts edges skipped because an earlier CPDAG had already
    oriented them the other way, once per edge and contributing CPDAG; ``rejected`` lists the origins whose
    orientations were dropped because they made the graph non-extendible.
    Equality ignores all three.
    """

    __slots__ = ("provenance", "conflicts", "rejected")

    def __init__(self, amat, provenance=None, conflicts: int = 0, rejected: Sequence[int] = ()):
        super().__init__(amat)
        self.provenance = dict(provenance or {})
        self.conflicts = int(conflicts)
        self.rejected = tuple(rejected)


def aggregate_cpdags(cs: Sequence[MixedGraph], origins: Optional[Sequence] = None) -> Apdag:
    """Overlay orientations of ``cs`` in order, keeping only extendible steps.

    Starts from ``cs[0]``; every later graph may orient edges that are
    still undirected.  The whole contribution of one graph is dropped when
    the result has no consistent extension.  Meek's rules are applied at
    the end.  ``origins`` relabels positions in the provenance record
    (for instance with solution-path indices).
    """
    cs = list(cs)
    if not cs:
        raise ValueError("need at least one CPDAG to aggregate")
    origins = list(range(len(cs))) if origins is None else list(origins)
    if len(origins) != len(cs):
        raise ValueError("origins must match the number of CPDAGs")
    p = cs[0].p
    for c in cs[1:]:
        if c.p != p:
            raise ValueError(f"vertex counts differ: {p} vs {c.p}")
    pa0, _, ne0, _ = cs[0].masks
    pa, ne = list(pa0), list(ne0)
    prov = {(i, j): origins[0] for j in range(p) for i in bits(pa[j])}
    conflicts = 0
    rejected = []
    for k, c in enumerate(cs[1:], start=1):
        cpa = c.masks[0]
        new_pa, new_ne = list(pa), list(ne)
        added = []
        for i, j in sorted((i, j) for j in range(p) for i in bits(cpa[j])):
            if (new_ne[j] >> i) & 1:
                new_ne[i] &= ~(1 << j)
                new_ne[j] &= ~(1 << i)
                new_pa[j] |= 1 << i
                added.append((i, j))
            elif (new_pa[i] >> j) & 1:
                conflicts += 1
        if not added:
            continue
        if extension_masks(p, new_pa, new_ne) is None:
            rejected.append(origins[k])
            continue
        pa, ne = new_pa, new_ne
        for e in added:
            prov[e] = origins[k]
    closed_pa, closed_ne = _meek_masks(p, pa, ne)
    for j in range(p):
        for i in bits(closed_pa[j] & ~pa[j]):
            prov[(i, j)] = MEEK
    g = MixedGraph.from_masks(p, closed_pa, closed_ne)
    return Apdag(g.amat, prov, conflicts, rejected)


def kept_indices(path: SolutionPath) -> list[int]:
    """Positions of path entries whose skeleton lies inside the first entry's."""
    if not len(path):
        return []
    base = path[0].cpdag
    return [k for k, e in enumerate(path) if is_subskeleton(e.cpdag, base)]


class AgesResult(NamedTuple):
    apdag: Apdag
    path: SolutionPath
    discarded: tuple


def ages_run(
    src: CovarianceSource,
    lambda_min: Optional[float] = None,
    backward: str = "lower",
    path: Optional[SolutionPath] = None,
) -> AgesResult:
    """AGES on a covariance source (oracle or sample).

    ``path`` may be passed to reuse an already computed solution path.
    """
    if path is None:
        path = solution_path(src, lambda_min, backward=backward)
    keep = kept_indices(path)
    kept = set(keep)
    discarded = tuple(k for k in range(len(path)) if k not in kept)
    apdag = aggregate_cpdags([path[k].cpdag for k in keep], keep)
    return AgesResult(apdag, path, discarded)


def path_subdags(dag: Dag, path: SolutionPath) -> list[tuple[int, Dag]]:
    """``(position, dag restricted to that entry's skeleton)`` for kept path entries."""
    return [(k, restrict_to_skeleton(dag, skeleton(path[k].cpdag))) for k in kept_indices(path)]


def true_apdag(m: WeightedSem, path: Optional[SolutionPath] = None) -> Apdag:
    """The target APDAG: path skeletons filled with the true DAG's orientations."""
    if path is None:
        path = solution_path(true_covariance(m), 0.0)
    subs = path_subdags(m.dag, path)
    if not subs:
        return Apdag(MixedGraph.empty(m.p).amat)
    return aggregate_cpdags([cpdag_of(g) for _, g in subs])

