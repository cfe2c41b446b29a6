import csv
import io
import math

import pytest
from hypothesis import given, strategies as st

from ages.evaluation import (
    RECORD_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentConfig,
    MetricsRecord,
    orientation_precision_recall,
    paired_difference,
    path_correctness_rates,
    run_experiment,
    summarize,
    write_records_csv,
    write_summary_csv,
)
from ages.graph import MixedGraph
from ages.score import bic_lambda
from ages.sem import ConfigError
from helpers import COLLIDER, INFORMATIVE_3, G, TRIANGLE, dags


class TestPrecisionRecall:
    def test_fig1d_against_truth(self):
        truth = G(3, [(0, 1), (0, 2), (1, 2)])
        assert orientation_precision_recall(INFORMATIVE_3, truth) == (1.0, pytest.approx(2 / 3))

    def test_wrong_direction_counts_against(self):
        truth = G(3, [(2, 0), (1, 2)])
        assert orientation_precision_recall(COLLIDER, truth) == (0.5, 0.5)

    def test_undefined(self):
        prec, rec = orientation_precision_recall(TRIANGLE, G(3))
        assert math.isnan(prec) and math.isnan(rec)
        prec, rec = orientation_precision_recall(G(3), G(3, [(0, 1)]))
        assert math.isnan(prec) and rec == 0.0

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            orientation_precision_recall(G(2), G(3))

    @given(dags(2, 5))
    def test_truth_scores_perfectly(self, g):
        prec, rec = orientation_precision_recall(g, g)
        if g.n_edges:
            assert prec == rec == 1.0

    @given(dags(2, 5), st.randoms(use_true_random=False))
    def test_relabelling_invariant(self, g, rnd):
        perm = list(range(g.p))
        rnd.shuffle(perm)
        moved = MixedGraph.from_edges(g.p, [(perm[i], perm[j]) for i, j in g.directed_edges()])
        half = MixedGraph.from_edges(g.p, g.directed_edges()[::2])
        half_moved = MixedGraph.from_edges(g.p, [(perm[i], perm[j]) for i, j in half.directed_edges()])
        a = orientation_precision_recall(half, g)
        b = orientation_precision_recall(half_moved, moved)
        assert a == b or (math.isnan(a[0]) and math.isnan(b[0]) and a[1] == b[1])


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(replicates=0),
            dict(n=1),
            dict(lambda_policy="aic"),
            dict(lambda_policy="fixed"),
            dict(lambda_policy="fixed", lambdas=(0.1, 0.2)),
            dict(lambda_policy="grid"),
            dict(lambdas=(0.1,)),
            dict(lambda_policy="fixed", lambdas=(-0.1,)),
            dict(q_s=0.8, q_w=0.5),
            dict(p=0),
        ],
    )
    def test_rejects(self, kw):
        base = dict(p=4, n=100, q_s=0.3, q_w=0.2)
        base.update(kw)
        with pytest.raises(ConfigError):
            ExperimentConfig(**base)

    def test_penalties(self):
        assert ExperimentConfig(4, 100, 0.3, 0.2).penalties() == (bic_lambda(100),)
        cfg = ExperimentConfig(4, 100, 0.3, 0.2, "grid", [0.03, 0.05])
        assert cfg.penalties() == (0.03, 0.05)
        assert cfg.as_dict()["lambdas"] == [0.03, 0.05]


CFG = ExperimentConfig(p=5, n=200, q_s=0.4, q_w=0.2, replicates=6, seed=3)


class TestExperiment:
    def test_deterministic_and_shaped(self):
        a = run_experiment(CFG)
        b = run_experiment(CFG)
        assert a.records == b.records
        assert len(a.records) == 2 * (CFG.replicates - len(a.skipped))
        assert {r.method for r in a.records} == {"GES", "AGES"}

    def test_parallel_matches_serial(self):
        assert run_experiment(CFG, jobs=2).records == run_experiment(CFG, jobs=1).records

    def test_prefix_of_replicates_is_stable(self):
        short = ExperimentConfig(p=5, n=200, q_s=0.4, q_w=0.2, replicates=3, seed=3)
        head = [r for r in run_experiment(CFG).records if r.replicate < 3]
        assert run_experiment(short).records == head

    def test_ages_keeps_ges_orientations(self):
        recs = run_experiment(CFG).records
        by = {(r.replicate, r.method): r for r in recs}
        for rep in {r.replicate for r in recs}:
            g, a = by[(rep, "GES")], by[(rep, "AGES")]
            assert a.n_edges == g.n_edges
            assert a.n_directed >= g.n_directed

    def test_grid(self):
        cfg = ExperimentConfig(4, 100, 0.3, 0.3, "grid", (0.03, 0.05), replicates=3, seed=1)
        res = run_experiment(cfg)
        assert sorted({r.lam for r in res.records}) == [0.03, 0.05]
        assert len(res.summary()) == 2 * 2 * 2


def _rec(rep, method, prec, rec):
    return MetricsRecord(rep, method, 0.1, prec, rec, 0, 0, 0, 0)


class TestSummaries:
    def test_summarize_excludes_nan(self):
        recs = [_rec(0, "GES", 1.0, 0.5), _rec(1, "GES", math.nan, 0.7), _rec(2, "GES", 0.5, 0.9)]
        rows = {r.metric: r for r in summarize(recs)}
        assert rows["precision"].mean == 0.75 and rows["precision"].n_defined == 2
        assert rows["precision"].sem == pytest.approx(0.25)
        assert rows["recall"].mean == pytest.approx(0.7)

    def test_paired_difference(self):
        recs = [
            _rec(0, "GES", 0.5, 0.2),
            _rec(0, "AGES", 0.5, 0.4),
            _rec(1, "GES", 0.5, 0.3),
            _rec(1, "AGES", 0.5, 0.3),
            _rec(2, "GES", math.nan, 0.1),
        ]
        mean, se, n = paired_difference(recs, "recall")
        assert n == 2 and mean == pytest.approx(0.1) and se == pytest.approx(0.1)
        assert paired_difference(recs, "precision")[2] == 2

    def test_csv(self):
        recs = [_rec(0, "GES", math.nan, 0.5)]
        buf = io.StringIO()
        write_records_csv(recs, buf)
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert tuple(rows[0]) == RECORD_COLUMNS and rows[1][3] == "NA"
        buf = io.StringIO()
        write_records_csv(recs, buf, runtime=True)
        assert buf.getvalue().splitlines()[0].endswith(",runtime")
        buf = io.StringIO()
        write_summary_csv(summarize(recs), buf)
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert tuple(rows[0]) == SUMMARY_COLUMNS
        assert rows[1] == ["GES", "0.1", "precision", "NA", "NA", "0"]

    def test_runtime_not_compared(self):
        a = MetricsRecord(0, "GES", 0.1, 1.0, 1.0, 1, 1, 1, 1, runtime=1.0)
        assert a == MetricsRecord(0, "GES", 0.1, 1.0, 1.0, 1, 1, 1, 1, runtime=2.0)


def test_path_rates_empty_graphs_are_vacuous():
    cfg = ExperimentConfig(p=4, n=100, q_s=0.0, q_w=0.0, replicates=3, seed=0)
    rows, summary = path_correctness_rates(cfg)
    assert all(r.n_subcpdags == 0 and r.correct_subcpdags == 1.0 for r in rows)
    assert summary["correct_orientations"][0] == 1.0


def test_path_rates_deterministic():
    cfg = ExperimentConfig(p=5, n=100, q_s=0.5, q_w=0.3, replicates=4, seed=2)
    assert path_correctness_rates(cfg)[0] == path_correctness_rates(cfg)[0]
