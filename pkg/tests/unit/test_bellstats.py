"""
Unit tests for correlation estimates, the CHSH combination and bound verdicts.
"""

import itertools
import math
from fractions import Fraction

import pytest

from bellstats import (
    BOUND_SLACK,
    INCONCLUSIVE,
    SATISFIED,
    VIOLATED,
    ChshResult,
    CorrelationEstimate,
    OutcomeCounts,
    batch_std_error,
    bound_check,
    chsh,
    correlation,
    correlation_from_products,
    exact_correlation,
    independence_pvalue,
    singlet_joint,
)
from sim_errors import EmptySampleError

pytestmark = pytest.mark.unit


def _estimate(m, se=0.0, n=100):
    return CorrelationEstimate(m_hat=m, std_error=se, n_samples=n)


def test_correlation_from_counts():
    """Test M = (N++ + N-- - N+- - N-+)/N and its binomial error."""
    est = correlation(OutcomeCounts(n_pp=40, n_pm=10, n_mp=10, n_mm=40))
    assert est.m_hat == pytest.approx(0.6)
    assert est.std_error == pytest.approx(math.sqrt(0.64 / 100))
    assert est.n_samples == 100


def test_correlation_of_empty_sample():
    with pytest.raises(EmptySampleError):
        correlation(OutcomeCounts())


def test_counts_from_outcomes():
    counts = OutcomeCounts.from_outcomes([(1, 1), (1, -1), (-1, -1), (-1, -1)])
    assert counts == OutcomeCounts(1, 1, 0, 2)
    assert counts.total == 4


def test_counts_reject_negative():
    with pytest.raises(ValueError):
        OutcomeCounts(n_pp=-1)


def test_perfect_correlation_has_zero_binomial_error():
    est = correlation(OutcomeCounts(n_pp=5, n_mm=5))
    assert est.m_hat == 1.0
    assert est.std_error == 0.0


def test_batch_std_error_needs_two_batches():
    """Test fewer than two complete batches gives no batch error."""
    assert batch_std_error([1, -1] * 7, batch_size=8) is None
    assert batch_std_error([1] * 16, batch_size=8) == 0.0


def test_correlation_from_products_batch_estimator():
    products = [1] * 8 + [-1] * 8
    est = correlation_from_products(products, estimator="batch", batch_size=8)
    assert est.m_hat == 0.0
    assert est.estimator == "batch"
    assert est.std_error == pytest.approx(math.sqrt(2.0) / math.sqrt(2.0))


def test_correlation_from_products_falls_back_to_binomial():
    est = correlation_from_products([1, -1, 1], estimator="batch", batch_size=8)
    assert est.std_error == pytest.approx(math.sqrt((1 - (1 / 3) ** 2) / 3))


def test_correlation_from_products_rejects_unknown_estimator():
    with pytest.raises(ValueError, match="estimator"):
        correlation_from_products([1], estimator="jackknife")


def test_chsh_combination_and_error():
    """Test S = M(a,b) + M(a',b) + M(a,b') - M(a',b') with root-sum-square error."""
    result = chsh(_estimate(0.5, 0.03), _estimate(0.4, 0.04), _estimate(0.3, 0.0), _estimate(-0.2, 0.0))
    assert result.s_value == pytest.approx(1.4)
    assert result.s_error == pytest.approx(0.05)


def test_bound_check_verdicts():
    """Test the two-sigma rule in both directions."""
    violated = bound_check(chsh(_estimate(-0.7, 0.01), _estimate(-0.7, 0.01), _estimate(-0.7, 0.01), _estimate(0.7, 0.01)))
    assert violated.verdict == VIOLATED
    assert violated.margin == pytest.approx(0.8)

    satisfied = bound_check(chsh(_estimate(0.2, 0.01), _estimate(0.2), _estimate(0.2), _estimate(0.2)))
    assert satisfied.verdict == SATISFIED
    assert satisfied.margin == pytest.approx(-1.6)

    close = bound_check(chsh(_estimate(0.55, 0.1), _estimate(0.5), _estimate(0.5), _estimate(-0.5)))
    assert close.verdict == INCONCLUSIVE


def test_singlet_joint_is_normalized_with_cosine_correlation():
    """Test the exact singlet correlation is -cos(theta)."""
    for theta in (0.0, math.pi / 4, math.pi / 2, 2.0):
        joint = singlet_joint(theta)
        assert sum(p for _, p in joint) == pytest.approx(1.0)
        assert exact_correlation(joint) == pytest.approx(-math.cos(theta))


def test_independence_pvalue():
    """Test strongly correlated outcomes give a tiny p-value and degenerate tables 1.0."""
    assert independence_pvalue(OutcomeCounts(n_pp=50, n_mm=50)) < 1e-6
    assert independence_pvalue(OutcomeCounts(n_pp=25, n_pm=25, n_mp=25, n_mm=25)) == pytest.approx(1.0)
    assert independence_pvalue(OutcomeCounts(n_pp=10, n_pm=10)) == 1.0


def _tables(n):
    """Every count table with n samples."""
    for n_pp, n_pm, n_mp in itertools.product(range(n + 1), repeat=3):
        n_mm = n - n_pp - n_pm - n_mp
        if n_mm >= 0:
            yield OutcomeCounts(n_pp, n_pm, n_mp, n_mm)


@pytest.mark.parametrize("n", range(1, 7))
def test_correlation_on_every_small_table(n):
    """Test the estimate, its error and both flip symmetries on all tables with n <= 6."""
    for counts in _tables(n):
        est = correlation(counts)
        exact = Fraction(counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp, n)
        assert est.m_hat == pytest.approx(float(exact), abs=1e-15)
        assert -1.0 <= est.m_hat <= 1.0
        assert est.std_error == pytest.approx(math.sqrt((1 - float(exact) ** 2) / n))
        assert est.n_samples == n

        both_flipped = correlation(OutcomeCounts(counts.n_mm, counts.n_mp, counts.n_pm, counts.n_pp))
        assert both_flipped == est
        one_flipped = correlation(OutcomeCounts(counts.n_mp, counts.n_mm, counts.n_pp, counts.n_pm))
        assert one_flipped.m_hat == pytest.approx(-est.m_hat, abs=1e-15)
        assert one_flipped.std_error == pytest.approx(est.std_error)


@pytest.mark.parametrize("n", [1, 2])
def test_chsh_on_every_small_table_combination(n):
    """Test S, its root-sum-square error and |S| <= 4 over all combinations of tiny tables."""
    estimates = [correlation(c) for c in _tables(n)]
    for m_ab, m_apb, m_abp, m_apbp in itertools.product(estimates, repeat=4):
        result = chsh(m_ab, m_apb, m_abp, m_apbp)
        assert result.s_value == pytest.approx(m_ab.m_hat + m_apb.m_hat + m_abp.m_hat - m_apbp.m_hat)
        assert abs(result.s_value) <= 4.0 + 1e-12
        expected_error = math.sqrt(sum(e.std_error ** 2 for e in (m_ab, m_apb, m_abp, m_apbp)))
        assert result.s_error == pytest.approx(expected_error)


def test_std_error_scales_as_inverse_root_n():
    base = OutcomeCounts(n_pp=3, n_pm=1, n_mp=2, n_mm=4)
    reference = correlation(base)
    for k in (4, 16, 100):
        scaled = correlation(OutcomeCounts(*(k * v for v in (3, 1, 2, 4))))
        assert scaled.m_hat == pytest.approx(reference.m_hat)
        assert scaled.std_error == pytest.approx(reference.std_error / math.sqrt(k))


def test_exact_result_on_the_bound_is_not_a_violation():
    """Test float noise around |S| = 2 with zero error counts as satisfying the bound."""
    for s_value in (2.0 + 4e-16, 2.0, -2.0 - 1e-15, 2.0 + BOUND_SLACK / 2):
        verdict = bound_check(ChshResult(s_value=s_value, s_error=0.0, components=()))
        assert verdict.verdict == SATISFIED
        assert verdict.margin == 0.0

    assert bound_check(ChshResult(s_value=2.001, s_error=0.0, components=())).verdict == VIOLATED
    assert bound_check(ChshResult(s_value=1.999, s_error=0.0, components=())).verdict == SATISFIED
    assert bound_check(ChshResult(s_value=2.0, s_error=0.1, components=())).verdict == INCONCLUSIVE
