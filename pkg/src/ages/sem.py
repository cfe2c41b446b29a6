"""Linear Gaussian structural equation models ``X = B^T X + eps``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import CycleError, Dag, MixedGraph, bits, topological_order

__all__ = [
    "ConfigError",
    "SingularError",
    "WeightedSem",
    "CovarianceSource",
    "SemGenConfig",
    "make_rng",
    "random_sem",
    "true_covariance",
    "sample_covariance",
    "sample_data",
    "partial_correlation",
    "ORACLE_ZERO_TOL",
]

#: in oracle mode partial correlations below this magnitude are exact zeros
ORACLE_ZERO_TOL = 1e-10
RCOND_MIN = 1e-12


class ConfigError(ValueError):
    pass


class SingularError(ArithmeticError):
    def __init__(self, subset, message=None):
        self.subset = tuple(sorted(subset))
        super().__init__(message or f"covariance submatrix over {list(self.subset)} is singular")


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class WeightedSem:
    """Weight matrix ``B`` (``B[i, j] != 0`` means ``i -> j``) and noise variances ``D``."""

    B: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        D = np.array(self.D, dtype=float).ravel()
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ConfigError(f"B must be square, got shape {B.shape}")
        if D.shape != (B.shape[0],):
            raise ConfigError(f"D must have length {B.shape[0]}, got {D.shape}")
        if not np.all(np.isfinite(B)) or not np.all(np.isfinite(D)):
            raise ConfigError("B and D must be finite")
        if np.any(D <= 0):
            raise ConfigError("noise variances must be strictly positive")
        if np.any(np.diag(B) != 0):
            raise ConfigError("B must have a zero diagonal")
        nz = B != 0
        both = np.argwhere(nz & nz.T)
        if len(both):
            i, j = (int(v) for v in both[0])
            raise CycleError([i, j, i])
        B.setflags(write=False)
        D.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)
        self.dag  # raises CycleError for cyclic patterns

    @property
    def p(self) -> int:
        return self.B.shape[0]

    @property
    def dag(self) -> Dag:
        return Dag(self.B != 0)

    def __eq__(self, other):
        if not isinstance(other, WeightedSem):
            return NotImplemented
        return np.array_equal(self.B, other.B) and np.array_equal(self.D, other.D)

    __hash__ = None


class CovarianceSource:
    """A covariance matrix, exact (``n is None``) or estimated from ``n`` samples.

    Partial correlations are memoized per instance; the matrix itself is
    read-only so instances can be shared freely.
    """

    def __init__(self, sigma, n: Optional[int] = None):
        s = np.array(sigma, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError(f"covariance must be square, got shape {s.shape}")
        scale = max(1.0, float(np.abs(s).max(initial=0.0)))
        if np.abs(s - s.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("covariance matrix is not symmetric")
        s = (s + s.T) / 2
        if s.shape[0]:
            try:
                np.linalg.cholesky(s)
            except np.linalg.LinAlgError:
                raise SingularError(range(s.shape[0]), "covariance matrix is not positive definite") from None
        if n is not None:
            if int(n) != n or n < 2:
                raise ValueError(f"sample size must be an integer >= 2, got {n}")
            n = int(n)
        s.setflags(write=False)
        self.sigma = s
        self.n = n
        sd = np.sqrt(np.diag(s))
        corr = s / np.outer(sd, sd) if s.size else s.copy()
        corr.setflags(write=False)
        self._corr = corr
        self._cache: dict = {}

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    @property
    def oracle(self) -> bool:
        return self.n is None

    def __repr__(self):
        mode = "oracle" if self.oracle else f"n={self.n}"
        return f"CovarianceSource(p={self.p}, {mode})"

    def pcorr(self, i: int, j: int, smask: int) -> float:
        """Partial correlation of ``i`` and ``j`` given the vertex bitmask ``smask``."""
        if i > j:
            i, j = j, i
        key = (i, j, smask)
        r = self._cache.get(key)
        if r is None:
            r = self._compute(i, j, smask)
            self._cache[key] = r
        return r

    def _compute(self, i, j, smask):
        idx = [i, j, *bits(smask)]
        if not smask:
            r = float(self._corr[i, j])
        else:
            sub = self._corr[np.ix_(idx, idx)]
            try:
                prec = np.linalg.inv(sub)
            except np.linalg.LinAlgError:
                raise SingularError(idx) from None
            rcond = 1.0 / (np.abs(sub).sum(axis=0).max() * np.abs(prec).sum(axis=0).max())
            if not rcond >= RCOND_MIN:
                raise SingularError(idx)
            r = float(-prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1]))
        r = min(1.0, max(-1.0, r))
        if self.n is None and abs(r) < ORACLE_ZERO_TOL:
            r = 0.0
        return r


def partial_correlation(src: CovarianceSource, i: int, j: int, s=()) -> float:
    """Partial correlation ``rho(i, j | s)`` from the inverse of the principal submatrix."""
    s = set(int(v) for v in s)
    p = src.p
    for v in (i, j, *s):
        if not 0 <= v < p:
            raise IndexError(f"vertex {v} out of range for p={p}")
    if i == j or i in s or j in s:
        raise ValueError("partial correlation needs distinct i, j outside the conditioning set")
    m = 0
    for v in s:
        m |= 1 << v
    return src.pcorr(i, j, m)


@dataclass(frozen=True)
class SemGenConfig:
    p: int
    q_s: float
    q_w: float
    seed: int = 0
    strong_range: tuple = (0.8, 1.2)
    weak_range: tuple = (0.1, 0.3)
    var_range: tuple = (0.5, 1.5)
    permute: bool = False

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ConfigError(f"p must be a positive integer, got {self.p}")
        for name in ("q_s", "q_w"):
            q = getattr(self, name)
            if not 0 <= q <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {q}")
        if self.q_s + self.q_w > 1 + 1e-12:
            raise ConfigError(f"q_s + q_w must be <= 1, got {self.q_s + self.q_w}")
        for name in ("strong_range", "weak_range", "var_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")


def random_sem(cfg: SemGenConfig, rng=None) -> WeightedSem:
    """Draw a random SEM: every pair ``i < j`` is strong, weak or absent.

    ``rng`` overrides ``cfg.seed`` when given.
    """
    rng = make_rng(cfg.seed if rng is None else rng)
    p = cfg.p
    u = rng.random((p, p))
    strong = rng.uniform(*cfg.strong_range, size=(p, p))
    weak = rng.uniform(*cfg.weak_range, size=(p, p))
    sign = np.where(rng.random((p, p)) < 0.5, -1.0, 1.0)
    D = rng.uniform(*cfg.var_range, size=p)
    mag = np.where(u < cfg.q_s, strong, np.where(u < cfg.q_s + cfg.q_w, weak, 0.0))
    B = np.triu(mag * sign, k=1)
    if cfg.permute:
        perm = rng.permutation(p)
        B = B[np.ix_(perm, perm)]
        D = D[perm]
    return WeightedSem(B + 0.0, D)


def true_covariance(m: WeightedSem) -> CovarianceSource:
    """``Sigma = (I - B^T)^{-1} D (I - B)^{-1}``."""
    p = m.p
    inv = np.linalg.inv(np.eye(p) - m.B)
    sigma = inv.T @ np.diag(m.D) @ inv
    return CovarianceSource((sigma + sigma.T) / 2)


def sample_covariance(X) -> np.ndarray:
    """Mean-centred covariance with ``1/n`` normalization."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]


def sample_data(m: WeightedSem, n: int, seed=0) -> tuple[np.ndarray, CovarianceSource]:
    """Draw ``n`` rows by forward substitution in topological order."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    rng = make_rng(seed)
    z = rng.standard_normal((n, m.p))
    X = np.zeros((n, m.p))
    for j in topological_order(MixedGraph(m.B != 0)):
        X[:, j] = X @ m.B[:, j] + np.sqrt(m.D[j]) * z[:, j]
    return X, CovarianceSource(sample_covariance(X), n=n)
