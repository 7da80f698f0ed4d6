#!/usr/bin/env python3
"""
Bell correlation, CHSH combination and bound verdicts.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chi2_contingency

from sim_errors import EmptySampleError

CHSH_BOUND = 2.0
VERDICT_SIGMAS = 2.0
# Exact models sum floats; |S| within this of the bound counts as on it.
BOUND_SLACK = 1e-9

SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class OutcomeCounts:
    n_pp: int = 0
    n_pm: int = 0
    n_mp: int = 0
    n_mm: int = 0

    def __post_init__(self):
        for name in ("n_pp", "n_pm", "n_mp", "n_mm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[Tuple[int, int]]) -> "OutcomeCounts":
        counts = {(1, 1): 0, (1, -1): 0, (-1, 1): 0, (-1, -1): 0}
        for x_a, x_b in outcomes:
            counts[(int(x_a), int(x_b))] += 1
        return cls(counts[(1, 1)], counts[(1, -1)], counts[(-1, 1)], counts[(-1, -1)])

    def as_table(self) -> np.ndarray:
        return np.array([[self.n_pp, self.n_pm], [self.n_mp, self.n_mm]])


@dataclass(frozen=True)
class CorrelationEstimate:
    m_hat: float
    std_error: float
    n_samples: int
    estimator: str = "binomial"


@dataclass(frozen=True)
class ChshResult:
    s_value: float
    s_error: float
    components: Tuple[CorrelationEstimate, ...]
    notes: Tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class BoundVerdict:
    verdict: str
    margin: float


def correlation(counts: OutcomeCounts) -> CorrelationEstimate:
    """
    Average product of outcomes with binomial standard error sqrt((1 - m^2)/N).

    Raises:
        EmptySampleError: If no outcome was recorded
    """
    n = counts.total
    if n == 0:
        raise EmptySampleError("Cannot estimate a correlation from zero samples")
    m_hat = (counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp) / n
    return CorrelationEstimate(m_hat=m_hat, std_error=math.sqrt(max(0.0, 1.0 - m_hat * m_hat) / n), n_samples=n)


def batch_std_error(products: Sequence[float], batch_size: int = 8) -> Optional[float]:
    """
    Standard error from the spread of batch means.

    Returns None when fewer than two complete batches exist.
    """
    values = np.asarray(products, dtype=float)
    n_batches = len(values) // batch_size
    if n_batches < 2:
        return None
    means = values[: n_batches * batch_size].reshape(n_batches, batch_size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def correlation_from_products(
    products: Sequence[int], estimator: str = "binomial", batch_size: int = 8
) -> CorrelationEstimate:
    """Correlation of a product sequence with the chosen error estimator."""
    n = len(products)
    if n == 0:
        raise EmptySampleError("Cannot estimate a correlation from zero samples")
    m_hat = float(sum(products)) / n
    binomial = math.sqrt(max(0.0, 1.0 - m_hat * m_hat) / n)
    if estimator == "batch":
        batched = batch_std_error(products, batch_size)
        return CorrelationEstimate(m_hat, binomial if batched is None else batched, n, "batch")
    if estimator != "binomial":
        raise ValueError(f"Unknown error estimator '{estimator}'")
    return CorrelationEstimate(m_hat, binomial, n, "binomial")


def chsh(
    m_ab: CorrelationEstimate,
    m_apb: CorrelationEstimate,
    m_abp: CorrelationEstimate,
    m_apbp: CorrelationEstimate,
    notes: Sequence[str] = (),
) -> ChshResult:
    """S = M(a,b) + M(a',b) + M(a,b') - M(a',b') with root-sum-square error."""
    s_value = m_ab.m_hat + m_apb.m_hat + m_abp.m_hat - m_apbp.m_hat
    s_error = math.sqrt(sum(e.std_error ** 2 for e in (m_ab, m_apb, m_abp, m_apbp)))
    return ChshResult(s_value=s_value, s_error=s_error, components=(m_ab, m_apb, m_abp, m_apbp), notes=tuple(notes))


def bound_check(result: ChshResult) -> BoundVerdict:
    """
    Compare |S| with 2 at two standard errors. An exact result (zero error) on
    the bound satisfies it.
    """
    excess = abs(result.s_value) - CHSH_BOUND
    if abs(excess) <= BOUND_SLACK:
        excess = 0.0
    threshold = VERDICT_SIGMAS * result.s_error
    if excess > threshold:
        verdict = VIOLATED
    elif -excess > threshold or (threshold == 0.0 and excess == 0.0):
        verdict = SATISFIED
    else:
        verdict = INCONCLUSIVE
    return BoundVerdict(verdict=verdict, margin=excess)


def independence_pvalue(counts: OutcomeCounts) -> float:
    """
    Chi-square test of independence between the two sides' outcomes.

    Degenerate tables (an empty row or column) carry no evidence and give 1.0.
    """
    table = counts.as_table()
    if (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
        return 1.0
    return float(chi2_contingency(table)[1])


def exact_correlation(joint: Sequence[Tuple[Tuple[int, int], float]]) -> float:
    """Sum of x*y*P(x,y) over an explicit joint distribution."""
    return float(sum(x * y * p for (x, y), p in joint))


def singlet_joint(theta: float) -> List[Tuple[Tuple[int, int], float]]:
    """Joint outcome probabilities (1 - x y cos(theta))/4."""
    return [((x, y), (1.0 - x * y * math.cos(theta)) / 4.0) for x in (1, -1) for y in (1, -1)]
