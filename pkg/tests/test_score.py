import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ages.graph import build_dag
from ages.score import (
    DomainError,
    bic_lambda,
    check_penalty,
    critical_lambda,
    delta_of_lambda,
    deletion_improves,
    gaussian_score,
    insertion_improves,
    score_diff,
)
from ages.sem import CovarianceSource, true_covariance
from helpers import example1, weighted_sems


class TestScoreDiff:
    def test_zero_correlation(self):
        src = CovarianceSource(np.eye(2))
        assert score_diff(src, 0, 1, (), 0.01) == pytest.approx(0.01)

    def test_example1_weak_edge(self):
        src = true_covariance(example1())
        d = score_diff(src, 0, 1, (), 0.0)
        assert d == pytest.approx(0.5 * math.log(1 - 0.01 / 1.01), rel=1e-12)
        assert d == pytest.approx(-0.00498, abs=1e-5)

    def test_breakpoint_is_not_an_improvement(self):
        rho = 0.3
        lam = critical_lambda(rho)
        assert not insertion_improves(rho, lam)
        assert insertion_improves(rho, lam * 0.999)
        assert not deletion_improves(rho, lam)
        assert deletion_improves(rho, lam * 1.001)

    def test_zero_penalty_deletes_only_exact_zeros(self):
        assert deletion_improves(0.0, 0.0)
        assert not deletion_improves(1e-6, 0.0)

    def test_parent_already_present(self):
        src = true_covariance(example1())
        with pytest.raises(ValueError):
            score_diff(src, 0, 2, {0, 1})


class TestPenalties:
    def test_critical_lambda_values(self):
        assert critical_lambda(0.0) == 0.0
        assert critical_lambda(0.5) == pytest.approx(-0.5 * math.log(0.75))
        with pytest.raises(DomainError):
            critical_lambda(1.0)

    def test_bic(self):
        assert bic_lambda(10000) == pytest.approx(0.00046051, abs=1e-8)
        assert bic_lambda(100) == pytest.approx(0.023025, abs=1e-6)
        assert delta_of_lambda(bic_lambda(100)) == pytest.approx(0.2125, abs=1e-3)
        assert bic_lambda(100.0) == bic_lambda(100)
        with pytest.raises(DomainError):
            bic_lambda(math.e)
        with pytest.raises(DomainError):
            bic_lambda(1)

    def test_check_penalty(self):
        assert check_penalty(0.1) == 0.1
        with pytest.raises(DomainError):
            check_penalty(-1e-3)
        with pytest.raises(DomainError):
            check_penalty(bic_lambda(100) / 2, n=100)
        assert check_penalty(bic_lambda(100), n=100) == bic_lambda(100)


@given(st.floats(0, 0.999999))
def test_delta_inverts_critical(d):
    assert delta_of_lambda(critical_lambda(d)) == pytest.approx(d, abs=1e-9)


@given(st.floats(0, 0.99), st.floats(0, 0.99))
def test_critical_lambda_monotone(a, b):
    if a < b:
        assert critical_lambda(a) < critical_lambda(b)


@given(weighted_sems(max_p=4), st.floats(0, 1), st.data())
def test_penalty_shift_is_exact(m, lam, data):
    src = true_covariance(m)
    i, j = data.draw(st.lists(st.integers(0, m.p - 1), min_size=2, max_size=2, unique=True))
    assert score_diff(src, i, j, (), lam) == score_diff(src, i, j, (), 0.0) + lam


@given(weighted_sems(max_p=4), st.data())
def test_symmetric_for_equal_conditioning(m, data):
    src = true_covariance(m)
    i, j = data.draw(st.lists(st.integers(0, m.p - 1), min_size=2, max_size=2, unique=True))
    assert score_diff(src, i, j, (), 0.1) == score_diff(src, j, i, (), 0.1)


@given(st.floats(0, 0.99), st.floats(0, 0.99), st.floats(0, 0.5))
def test_larger_correlation_gives_smaller_diff(a, b, lam):
    def diff(r):
        return 0.5 * math.log1p(-r * r) + lam

    src_a = CovarianceSource([[1, a], [a, 1]])
    src_b = CovarianceSource([[1, b], [b, 1]])
    if a < b:
        assert score_diff(src_a, 0, 1, (), lam) >= score_diff(src_b, 0, 1, (), lam)
    assert score_diff(src_a, 0, 1, (), lam) == pytest.approx(diff(a))


@given(weighted_sems(max_p=4), st.floats(0, 0.05), st.randoms(use_true_random=False))
def test_increments_sum_to_closed_form_score(m, lam, rnd):
    # insert the edges of the SEM's DAG in a random topologically valid order
    src = true_covariance(m)
    edges = m.dag.directed_edges()
    rnd.shuffle(edges)
    empty = build_dag(m.p, [])
    total = gaussian_score(src, empty, lam)
    parents = {v: set() for v in range(m.p)}
    for i, j in edges:
        total += score_diff(src, i, j, parents[j], lam)
        parents[j].add(i)
    assert total == pytest.approx(gaussian_score(src, m.dag, lam), abs=1e-9)
