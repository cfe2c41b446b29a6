"""Replicated GES-versus-AGES experiments and orientation metrics.

Each replicate draws a random SEM, samples data, runs GES at the smallest
penalty and AGES on the solution path, and scores the directed parts of
both estimates against the true DAG.  Replicate ``r`` uses its own child
of ``SeedSequence(cfg.seed)``, so results do not depend on the number of
workers or on scheduling order.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .aggregate import ages_run, path_subdags, true_apdag
from .equivalence import cpdag_of
from .ges import solution_path
from .graph import MixedGraph
from .score import bic_lambda, check_penalty
from .sem import ConfigError, SemGenConfig, SingularError, random_sem, sample_data, true_covariance

__all__ = [
    "ExperimentConfig",
    "MetricsRecord",
    "SummaryRow",
    "ExperimentResult",
    "PathRates",
    "orientation_precision_recall",
    "run_experiment",
    "summarize",
    "paired_difference",
    "path_correctness_rates",
    "write_records_csv",
    "write_summary_csv",
    "RECORD_COLUMNS",
    "SUMMARY_COLUMNS",
]

POLICIES = ("bic", "fixed", "grid")
METHODS = ("GES", "AGES")

RECORD_COLUMNS = (
    "replicate",
    "method",
    "lambda",
    "precision",
    "recall",
    "n_correct",
    "n_directed",
    "n_edges",
    "n_true_edges",
)
SUMMARY_COLUMNS = ("method", "lambda", "metric", "mean", "sem", "n_defined")
NA = "NA"


def orientation_precision_recall(estimate: MixedGraph, truth: MixedGraph) -> tuple[float, float]:
    """Precision and recall of the directed edges of ``estimate``.

    A directed edge counts as correct when the same edge, with the same
    direction, is in ``truth``.  A zero denominator gives ``nan``.
    """
    if estimate.p != truth.p:
        raise ValueError(f"vertex counts differ: {estimate.p} vs {truth.p}")
    est = estimate.directed_edges()
    true = set(truth.directed_edges())
    correct = sum(1 for e in est if e in true)
    n_true = truth.n_edges
    precision = correct / len(est) if est else math.nan
    recall = correct / n_true if n_true else math.nan
    return precision, recall


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    n: int
    q_s: float
    q_w: float
    lambda_policy: str = "bic"
    lambdas: tuple = ()
    replicates: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigError(f"replicates must be a positive integer, got {self.replicates}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n}")
        if self.lambda_policy not in POLICIES:
            raise ConfigError(f"lambda_policy must be one of {POLICIES}, got {self.lambda_policy!r}")
        if self.lambda_policy == "fixed" and len(self.lambdas) != 1:
            raise ConfigError("the fixed policy takes exactly one lambda")
        if self.lambda_policy == "grid" and not self.lambdas:
            raise ConfigError("the grid policy needs at least one lambda")
        if self.lambda_policy == "bic" and self.lambdas:
            raise ConfigError("the bic policy takes no explicit lambdas")
        for lam in self.lambdas:
            try:
                check_penalty(lam, self.n)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        self.sem_config(0)  # validates p, q_s, q_w

    def sem_config(self, seed) -> SemGenConfig:
        return SemGenConfig(self.p, self.q_s, self.q_w, seed=seed)

    def penalties(self) -> tuple:
        if self.lambda_policy == "bic":
            return (bic_lambda(self.n),)
        return self.lambdas

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "q_s": self.q_s,
            "q_w": self.q_w,
            "lambda_policy": self.lambda_policy,
            "lambdas": list(self.lambdas),
            "replicates": self.replicates,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class MetricsRecord:
    replicate: int
    method: str
    lam: float
    precision: float
    recall: float
    n_correct: int
    n_directed: int
    n_edges: int
    n_true_edges: int
    runtime: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class SummaryRow:
    method: str
    lam: float
    metric: str
    mean: float
    sem: float
    n_defined: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    skipped: list

    def summary(self) -> list[SummaryRow]:
        return summarize(self.records)


def _score(rep, method, lam, est, truth, runtime):
    precision, recall = orientation_precision_recall(est, truth)
    true = set(truth.directed_edges())
    directed = est.directed_edges()
    return MetricsRecord(
        rep,
        method,
        lam,
        precision,
        recall,
        sum(1 for e in directed if e in true),
        len(directed),
        est.n_edges,
        truth.n_edges,
        runtime,
    )


def _replicate_streams(seed: int, replicates: int):
    return [child.spawn(2) for child in np.random.SeedSequence(seed).spawn(replicates)]


def _run_replicate(args):
    cfg, rep, (sem_ss, data_ss) = args
    m = random_sem(cfg.sem_config(cfg.seed), rng=np.random.Generator(np.random.PCG64(sem_ss)))
    truth = m.dag
    try:
        _, src = sample_data(m, cfg.n, data_ss)
        out = []
        for lam in cfg.penalties():
            t0 = time.perf_counter()
            res = ages_run(src, lambda_min=lam)
            elapsed = time.perf_counter() - t0
            out.append(_score(rep, "GES", lam, res.path[0].cpdag, truth, elapsed))
            out.append(_score(rep, "AGES", lam, res.apdag, truth, elapsed))
        return rep, out
    except SingularError:
        return rep, None


def _map(fn, items, jobs):
    jobs = jobs or int(os.environ.get("AGES_JOBS", "1"))
    if jobs <= 1 or len(items) <= 1:
        return [fn(a) for a in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def run_experiment(cfg: ExperimentConfig, jobs: Optional[int] = None) -> ExperimentResult:
    """Run all replicates; replicates with a singular covariance are skipped and listed."""
    streams = _replicate_streams(cfg.seed, cfg.replicates)
    results = _map(_run_replicate, [(cfg, r, s) for r, s in enumerate(streams)], jobs)
    records, skipped = [], []
    for rep, out in sorted(results, key=lambda t: t[0]):
        if out is None:
            skipped.append(rep)
        else:
            records.extend(out)
    return ExperimentResult(cfg, records, skipped)


def _mean_sem(values):
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan, 0
    arr = np.asarray(vals)
    sem = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else math.nan
    return float(arr.mean()), sem, len(arr)


def summarize(records: Iterable[MetricsRecord]) -> list[SummaryRow]:
    """Mean and standard error of precision and recall per method and penalty."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.lam, r.method), []).append(r)
    rows = []
    for lam in sorted({k[0] for k in groups}):
        for method in METHODS:
            recs = groups.get((lam, method))
            if not recs:
                continue
            for metric in ("precision", "recall"):
                mean, sem, n = _mean_sem([getattr(r, metric) for r in recs])
                rows.append(SummaryRow(method, lam, metric, mean, sem, n))
    return rows


def paired_difference(records: Sequence[MetricsRecord], metric: str, lam: Optional[float] = None):
    """Mean and standard error of ``AGES - GES`` over replicates where both are defined."""
    by = {}
    for r in records:
        if lam is None or r.lam == lam:
            by.setdefault(r.replicate, {})[r.method] = getattr(r, metric)
    diffs = [
        d["AGES"] - d["GES"]
        for d in by.values()
        if "AGES" in d and "GES" in d and not (math.isnan(d["AGES"]) or math.isnan(d["GES"]))
    ]
    return _mean_sem(diffs)


@dataclass(frozen=True)
class PathRates:
    replicate: int
    n_subcpdags: int
    correct_subcpdags: float
    n_oriented: int
    correct_orientations: float


def _path_rates(args):
    cfg, rep, (sem_ss, _) = args
    m = random_sem(cfg.sem_config(cfg.seed), rng=np.random.Generator(np.random.PCG64(sem_ss)))
    src = true_covariance(m)
    path = solution_path(src, 0.0)
    subs = [(k, g) for k, g in path_subdags(m.dag, path) if k >= 1]
    hits = sum(1 for k, g in subs if path[k].cpdag == cpdag_of(g))
    sub_rate = hits / len(subs) if subs else 1.0
    a0 = true_apdag(m, path)
    a = ages_run(src, path=path).apdag
    oriented = a.directed_edges()
    good = sum(1 for i, j in oriented if a0.is_directed(i, j))
    orient_rate = good / len(oriented) if oriented else 1.0
    return PathRates(rep, len(subs), sub_rate, len(oriented), orient_rate)


def path_correctness_rates(cfg: ExperimentConfig, jobs: Optional[int] = None) -> tuple[list[PathRates], dict]:
    """Oracle-mode share of path CPDAGs matching their sub-DAG CPDAGs, and of correct orientations.

    Empty paths and APDAGs without directed edges count as fully correct.
    Only ``p``, ``q_s``, ``q_w``, ``replicates`` and ``seed`` are used.
    """
    streams = _replicate_streams(cfg.seed, cfg.replicates)
    rows = _map(_path_rates, [(cfg, r, s) for r, s in enumerate(streams)], jobs)
    rows.sort(key=lambda r: r.replicate)
    summary = {
        "correct_subcpdags": _mean_sem([r.correct_subcpdags for r in rows])[:2],
        "correct_orientations": _mean_sem([r.correct_orientations for r in rows])[:2],
    }
    return rows, summary


def _fmt(v) -> str:
    if isinstance(v, float):
        return NA if math.isnan(v) else repr(float(v))
    return str(v)


def write_records_csv(records: Iterable[MetricsRecord], fh, runtime: bool = False) -> None:
    """One row per record in :data:`RECORD_COLUMNS` order; ``runtime`` appends wall time."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RECORD_COLUMNS + (("runtime",) if runtime else ()))
    for r in records:
        row = [r.replicate, r.method, r.lam, r.precision, r.recall, r.n_correct, r.n_directed, r.n_edges, r.n_true_edges]
        if runtime:
            row.append(r.runtime)
        w.writerow([_fmt(v) for v in row])


def write_summary_csv(rows: Iterable[SummaryRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in (r.method, r.lam, r.metric, r.mean, r.sem, r.n_defined)])
