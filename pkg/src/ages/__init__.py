"""Aggregated greedy equivalence search for linear Gaussian SEMs."""

from .aggregate import AgesResult, Apdag, aggregate_cpdags, ages_run, true_apdag
from .equivalence import consistent_extension, cpdag_of, meek_closure
from .estimators import AGES, GES
from .ges import SolutionPath, ges_run, solution_path
from .graph import Cpdag, Dag, MixedGraph, Pdag, d_separated
from .score import bic_lambda, critical_lambda, delta_of_lambda
from .sem import CovarianceSource, SemGenConfig, WeightedSem, random_sem, sample_data, true_covariance

__version__ = "0.1.0"

__all__ = [
    "AGES",
    "GES",
    "AgesResult",
    "Apdag",
    "CovarianceSource",
    "Cpdag",
    "Dag",
    "MixedGraph",
    "Pdag",
    "SemGenConfig",
    "SolutionPath",
    "WeightedSem",
    "aggregate_cpdags",
    "ages_run",
    "bic_lambda",
    "consistent_extension",
    "cpdag_of",
    "critical_lambda",
    "d_separated",
    "delta_of_lambda",
    "ges_run",
    "meek_closure",
    "random_sem",
    "sample_data",
    "solution_path",
    "true_apdag",
    "true_covariance",
]
