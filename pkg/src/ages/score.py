"""Penalized Gaussian log-likelihood increments and penalty conversions.

Adding ``i -> j`` to a DAG in which ``j`` has parents ``S`` changes the
score by ``0.5 * log(1 - rho(i, j | S)**2) + lam``; a move is taken only
when that change is strictly negative.
"""

from __future__ import annotations

import math
from numbers import Integral

import numpy as np

from .graph import Dag
from .sem import CovarianceSource, partial_correlation

__all__ = [
    "DomainError",
    "RHO_CLIP",
    "LAMBDA_RTOL",
    "score_diff",
    "critical_lambda",
    "delta_of_lambda",
    "bic_lambda",
    "insertion_improves",
    "deletion_improves",
    "gaussian_score",
    "check_penalty",
]

RHO_CLIP = 1 - 1e-12
#: relative slack when comparing a critical penalty against ``lam``
LAMBDA_RTOL = 1e-9


class DomainError(ValueError):
    pass


def _clip(rho: float) -> float:
    return min(RHO_CLIP, max(-RHO_CLIP, rho))


def critical_lambda(rho: float) -> float:
    """Largest penalty at which an edge with partial correlation ``rho`` still improves the score."""
    if not abs(rho) < 1:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    return -0.5 * math.log1p(-rho * rho)


def delta_of_lambda(lam: float) -> float:
    """Inverse of :func:`critical_lambda` on ``|rho|``."""
    if lam < 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    return math.sqrt(-math.expm1(-2.0 * lam))


def bic_lambda(n) -> float:
    if isinstance(n, bool) or not isinstance(n, (Integral, np.integer)):
        if not (isinstance(n, float) and n.is_integer()):
            raise DomainError(f"sample size must be an integer, got {n!r}")
    n = int(n)
    if n < 2:
        raise DomainError(f"sample size must be >= 2, got {n}")
    return math.log(n) / (2 * n)


def check_penalty(lam: float, n=None) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    if n is not None and lam < bic_lambda(n) * (1 - LAMBDA_RTOL):
        raise DomainError(f"lambda={lam} is below the BIC penalty {bic_lambda(n)} for n={n}")
    return lam


def score_diff(src: CovarianceSource, i: int, j: int, parents_of_j=(), lam: float = 0.0) -> float:
    """Score change from adding ``i -> j`` when ``j`` has parents ``parents_of_j``."""
    parents_of_j = set(parents_of_j)
    if i in parents_of_j:
        raise ValueError(f"{i} is already a parent of {j}")
    rho = _clip(partial_correlation(src, i, j, parents_of_j))
    return 0.5 * math.log1p(-rho * rho) + lam


def insertion_improves(rho: float, lam: float) -> bool:
    return critical_lambda(_clip(rho)) > lam * (1 + LAMBDA_RTOL)


def deletion_improves(rho: float, lam: float) -> bool:
    # lam == 0 is read as 0+: exact zero partial correlations are still removed
    if lam == 0:
        return rho == 0
    return critical_lambda(_clip(rho)) < lam * (1 - LAMBDA_RTOL)


def gaussian_score(src: CovarianceSource, dag: Dag, lam: float = 0.0) -> float:
    """Expected negative log-likelihood per observation plus ``lam * |E|``.

    Computed node by node from residual variances; used to cross-check
    the incremental formula.
    """
    sigma = src.sigma
    total = 0.0
    for j in range(dag.p):
        pa = sorted(dag.parents(j))
        var = sigma[j, j]
        if pa:
            s_pp = sigma[np.ix_(pa, pa)]
            s_pj = sigma[pa, j]
            var = var - s_pj @ np.linalg.solve(s_pp, s_pj)
        total += 0.5 * math.log(2 * math.pi * math.e * var)
    return total + lam * dag.n_edges
