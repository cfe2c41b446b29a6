"""scikit-learn style wrappers around GES and AGES."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .aggregate import ages_run
from .ges import ges_run, solution_path
from .sem import CovarianceSource, sample_covariance

__all__ = ["GES", "AGES"]


class _CausalEstimator(BaseEstimator):
    def _source_from_data(self, X) -> CovarianceSource:
        X = check_array(X, dtype=np.float64, ensure_min_samples=2, ensure_min_features=1)
        self.n_features_in_ = X.shape[1]
        return CovarianceSource(sample_covariance(X), n=X.shape[0])

    def _source_from_covariance(self, sigma, n_samples) -> CovarianceSource:
        sigma = check_array(sigma, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
        self.n_features_in_ = sigma.shape[1]
        return CovarianceSource(sigma, n=n_samples)


class GES(_CausalEstimator):
    """Greedy equivalence search at a single penalty.

    Parameters
    ----------
    lam : float or None
        Penalty per edge; ``None`` uses ``log(n) / (2n)`` for data and 0 for
        an exact covariance.

    Attributes
    ----------
    cpdag_ : Cpdag
    moves_ : list of GesMove
    """

    def __init__(self, lam: Optional[float] = None):
        self.lam = lam

    def fit(self, X, y=None):
        return self._fit(self._source_from_data(X))

    def fit_covariance(self, sigma, n_samples: Optional[int] = None):
        """Fit from a covariance matrix; ``n_samples=None`` means the exact covariance."""
        return self._fit(self._source_from_covariance(sigma, n_samples))

    def _fit(self, src):
        self.cpdag_, self.moves_ = ges_run(src, self.lam)
        return self


class AGES(_CausalEstimator):
    """Aggregated GES over the solution path.

    Parameters
    ----------
    lambda_min : float or None
        Smallest penalty on the path (defaults as for :class:`GES`).
    backward : {"lower", "exact"}
        How backward phases are evaluated along the path.

    Attributes
    ----------
    apdag_ : Apdag
    cpdag_ : Cpdag
        The GES estimate at ``lambda_min`` (first path entry).
    path_ : SolutionPath
    discarded_ : tuple of int
        Path positions dropped by skeleton containment.
    """

    def __init__(self, lambda_min: Optional[float] = None, backward: str = "lower"):
        self.lambda_min = lambda_min
        self.backward = backward

    def fit(self, X, y=None):
        return self._fit(self._source_from_data(X))

    def fit_covariance(self, sigma, n_samples: Optional[int] = None):
        return self._fit(self._source_from_covariance(sigma, n_samples))

    def _fit(self, src):
        path = solution_path(src, self.lambda_min, backward=self.backward)
        res = ages_run(src, path=path)
        self.path_ = res.path
        self.apdag_ = res.apdag
        self.cpdag_ = res.path[0].cpdag
        self.discarded_ = res.discarded
        return self

    def adjacency_matrix(self) -> np.ndarray:
        """Boolean matrix of the APDAG; ``i -> j`` sets only ``[i, j]``."""
        check_is_fitted(self, "apdag_")
        return np.array(self.apdag_.amat)
