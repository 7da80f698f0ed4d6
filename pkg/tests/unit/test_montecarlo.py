"""
Unit tests for the Monte Carlo driver, run with stub dynamics in place of the wave solver.
"""

import hashlib
import math
from dataclasses import replace

import numpy as np
import pytest

from artifacts import RunLedger
from bellstats import VIOLATED, CorrelationEstimate
from geometry import BellSettings, build_bath, outer_center_local
from hvt_toy import STANDARD_ANGLES
from montecarlo import (
    MIRRORED,
    ConstantStub,
    ConvergenceRule,
    CorrelatedStub,
    ProbabilityStub,
    RunExecutor,
    RunOutcome,
    RunSpec,
    SingletStub,
    chsh_experiment,
    derive_seed,
    estimate_M,
    run_once,
    sample_initials,
    sample_local_initials,
    sweep_alpha,
    sweep_dlambda,
)
from sim_errors import ConfigurationError

pytestmark = pytest.mark.unit


@pytest.fixture
def base_spec():
    return RunSpec(
        master_seed=7,
        delta_lambda=0.5,
        t_m=10,
        alpha=0.099,
        beta=0.099,
        convergence=ConvergenceRule(rel_tol=0.1, abs_tol=0.1, n_min=16, n_max=256, batch_size=8),
        dynamics=CorrelatedStub(m=0.5),
    )


class CountingExecutor(RunExecutor):
    """Inline executor that records which indices it was asked to run."""

    def __init__(self):
        super().__init__(1)
        self.calls = []

    def map(self, spec, indices):
        self.calls.extend(indices)
        return super().map(spec, indices)


def test_derive_seed_is_sha256_prefix():
    """Test per-run seeds are the little-endian sha256 prefix of 'master::index'."""
    expected = int.from_bytes(hashlib.sha256(b"42::3").digest()[:8], "little")
    assert derive_seed(42, 3) == expected
    assert derive_seed(42, 3) != derive_seed(42, 4)
    assert derive_seed(42, 3) != derive_seed(43, 3)


def test_mirrored_sampling_shares_local_offset():
    """Test mirrored draws give equal local coordinates and mirrored lab positions."""
    topo = build_bath(0.099, 0.099)
    s_a, s_b = sample_local_initials(MIRRORED, 0.6, topo, np.random.default_rng(1))
    assert s_a == s_b
    assert 0.2 <= s_a <= 0.8
    x_a, x_b = sample_initials(MIRRORED, 0.6, topo, np.random.default_rng(1))
    assert x_b == pytest.approx(topo.total_length - x_a)


def test_independent_sampling_stays_in_interval():
    topo = build_bath(0.099, 0.11)
    rng = np.random.default_rng(5)
    draws = [sample_local_initials("independent", 0.4, topo, rng) for _ in range(200)]
    flat = np.array(draws)
    assert flat.min() >= 0.3 and flat.max() <= 0.7
    assert any(a != b for a, b in draws)


def test_independent_draws_are_uncorrelated():
    """Test 10^4 independent lab-frame draws show no correlation between the two sides."""
    topo = build_bath(0.099, 0.099)
    rng = np.random.default_rng(2024)
    c_a = outer_center_local(topo, "A")
    c_b = topo.total_length - outer_center_local(topo, "B")
    draws = np.array([sample_initials("independent", 1.0, topo, rng) for _ in range(10_000)])
    offsets_a, offsets_b = draws[:, 0] - c_a, draws[:, 1] - c_b
    assert np.abs(offsets_a).max() <= 0.5 and np.abs(offsets_b).max() <= 0.5
    assert abs(np.corrcoef(offsets_a, offsets_b)[0, 1]) < 0.03


def test_zero_width_interval_starts_at_cavity_center():
    topo = build_bath(0.099, 0.099)
    assert sample_local_initials("independent", 0.0, topo, np.random.default_rng(0)) == (0.5, 0.5)


def test_sampling_rejects_interval_wider_than_cavity():
    topo = build_bath(0.099, 0.099)
    with pytest.raises(ConfigurationError) as exc:
        sample_local_initials(MIRRORED, 1.2, topo, np.random.default_rng(0))
    assert exc.value.field == "experiment.delta_lambda"


def test_sampling_rejects_unknown_mode():
    with pytest.raises(ConfigurationError):
        sample_local_initials("shuffled", 0.1, build_bath(0.099, 0.099), np.random.default_rng(0))


def test_asymmetry_offset_moves_droplet_b():
    topo = build_bath(0.099, 0.099)
    s_a, s_b = sample_local_initials(MIRRORED, 0.0, topo, np.random.default_rng(0), asymmetry_epsilon=0.01)
    assert s_b - s_a == pytest.approx(0.01)


def test_asymmetry_offset_requires_mirrored_sampling(base_spec):
    """Test independent sampling refuses an offset instead of silently shifting droplet B."""
    topo = build_bath(0.099, 0.099)
    with pytest.raises(ConfigurationError) as exc:
        sample_local_initials("independent", 0.2, topo, np.random.default_rng(0), asymmetry_epsilon=0.01)
    assert exc.value.field == "experiment.asymmetry_epsilon"
    with pytest.raises(ConfigurationError) as exc:
        replace(base_spec, asymmetry_epsilon=0.01).validate()
    assert exc.value.field == "experiment.asymmetry_epsilon"
    replace(base_spec, sampling_mode=MIRRORED, asymmetry_epsilon=0.01).validate()


@pytest.mark.parametrize(
    "rule,field",
    [
        (ConvergenceRule(rel_tol=0.0), "convergence.rel_tol"),
        (ConvergenceRule(abs_tol=0.0), "convergence.abs_tol"),
        (ConvergenceRule(n_min=10, n_max=5), "convergence.n_min"),
        (ConvergenceRule(batch_size=0), "convergence.batch_size"),
        (ConvergenceRule(error_estimator="bootstrap"), "convergence.error_estimator"),
    ],
)
def test_convergence_rule_validation(rule, field):
    with pytest.raises(ConfigurationError) as exc:
        rule.validate()
    assert exc.value.field == field


def test_run_spec_validation(base_spec):
    """Test RunSpec refuses bad sampling inputs before any run."""
    with pytest.raises(ConfigurationError, match="outer cavity"):
        replace(base_spec, delta_lambda=1.5).validate()
    with pytest.raises(ConfigurationError):
        replace(base_spec, sampling_mode="random").validate()
    with pytest.raises(ConfigurationError):
        replace(base_spec, t_m=0).validate()


def test_spec_hash_tracks_dynamics(base_spec):
    assert base_spec.spec_hash() == replace(base_spec).spec_hash()
    assert base_spec.spec_hash() != replace(base_spec, dynamics=CorrelatedStub(m=0.4)).spec_hash()
    assert base_spec.spec_hash() != replace(base_spec, t_m=11).spec_hash()


def test_run_once_with_stub_is_reproducible(base_spec):
    first = run_once(base_spec, 5)
    second = run_once(base_spec, 5)
    assert (first.x_a, first.x_b) == (second.x_a, second.x_b)
    assert first.seed == derive_seed(7, 5)
    assert not first.failed


def test_run_outcome_record_round_trip():
    outcome = RunOutcome(run_index=3, seed=11, failure_reason="central region", diagnostics={"steps": 4})
    restored = RunOutcome.from_record(outcome.to_record("abc"))
    assert restored.failed
    assert restored.failure_reason == "central region"
    assert restored.diagnostics == {"steps": 4}
    assert outcome.to_record("abc")["spec_hash"] == "abc"


def test_constant_outcomes_stop_after_n_min(base_spec):
    """Test a deterministic product converges at the first check with zero error."""
    est = estimate_M(replace(base_spec, dynamics=ConstantStub(1, -1)))
    assert est.converged
    assert est.m_hat == -1.0
    assert est.std_error == 0.0
    assert est.n_samples == 16
    assert est.stop_reason == "relative"


def test_uncorrelated_outcomes_use_absolute_rule(base_spec):
    """Test M near zero stops on the absolute tolerance under the default rule."""
    rule = ConvergenceRule()
    est = estimate_M(replace(base_spec, dynamics=ProbabilityStub(), convergence=rule))
    assert est.converged
    assert est.stop_reason == "absolute"
    assert est.std_error < rule.abs_tol
    assert est.n_samples >= 1000
    assert abs(est.m_hat) < 0.15


def test_stop_reason_prefers_relative_then_absolute():
    rule = ConvergenceRule()
    assert rule.stop_reason(CorrelationEstimate(m_hat=0.8, std_error=0.01, n_samples=100)) == "relative"
    assert rule.stop_reason(CorrelationEstimate(m_hat=0.0, std_error=0.02, n_samples=2500)) == "absolute"
    assert rule.stop_reason(CorrelationEstimate(m_hat=0.1, std_error=0.02, n_samples=2500)) == "absolute"
    assert rule.stop_reason(CorrelationEstimate(m_hat=0.1, std_error=0.05, n_samples=400)) is None


def test_chunk_schedule_and_reproducibility(base_spec):
    """Test n_min then whole batches, with identical results across calls."""
    first = estimate_M(base_spec)
    second = estimate_M(base_spec)
    assert (first.n_attempted - 16) % 8 == 0
    assert first.m_hat == second.m_hat
    assert [o.seed for o in first.outcomes] == [o.seed for o in second.outcomes]


def test_two_sigma_interval_covers_true_correlation(base_spec):
    """Test the 2 std_error interval holds the stub correlation for nearly every master seed."""
    covered = 0
    for seed in range(20):
        est = estimate_M(replace(base_spec, master_seed=seed))
        covered += abs(est.m_hat - 0.5) <= 2 * est.std_error
    assert covered >= 15


def test_unconverged_estimate_is_flagged(base_spec):
    """Test hitting n_max returns an unconverged estimate instead of raising."""
    rule = ConvergenceRule(rel_tol=0.001, abs_tol=0.001, n_min=8, n_max=24, batch_size=8)
    est = estimate_M(replace(base_spec, convergence=rule))
    assert not est.converged
    assert est.stop_reason == "max_runs"
    assert est.n_attempted == 24


def test_ledger_resume_skips_completed_runs(base_spec, temp_out_dir):
    """Test a resumed estimate reuses every ledger record and runs nothing."""
    path = temp_out_dir / "runs.jsonl"
    with CountingExecutor() as executor:
        first = estimate_M(base_spec, executor, RunLedger(path))
    assert len(executor.calls) == first.n_attempted

    with CountingExecutor() as executor:
        resumed = estimate_M(base_spec, executor, RunLedger(path, resume=True))
    assert executor.calls == []
    assert resumed.m_hat == first.m_hat
    assert resumed.n_attempted == first.n_attempted


def test_executor_rejects_zero_workers():
    with pytest.raises(ConfigurationError):
        RunExecutor(0)


def test_sweep_dlambda_orders_t_m_outermost(base_spec):
    table = sweep_dlambda(replace(base_spec, dynamics=ConstantStub()), [0.0, 0.5], [10, 20])
    assert [(r.t_m, r.sweep_var) for r in table.rows] == [(10, 0.0), (10, 0.5), (20, 0.0), (20, 0.5)]
    assert table.unconverged == 0


def test_sweep_rejects_empty_grid(base_spec):
    with pytest.raises(ConfigurationError):
        sweep_dlambda(base_spec, [], [10])
    with pytest.raises(ConfigurationError):
        sweep_alpha(base_spec, [])


def test_sweep_alpha_reports_each_depth(base_spec):
    seen = []
    table = sweep_alpha(replace(base_spec, dynamics=ConstantStub()), [0.08, 0.1], on_row=seen.append)
    assert [r.sweep_var for r in table.rows] == [0.08, 0.1]
    assert seen == table.rows


def test_chsh_with_singlet_stub_violates_bound(base_spec):
    """Test singlet statistics at the standard angles give S near -2*sqrt(2)."""
    settings = BellSettings(**STANDARD_ANGLES)
    rule = ConvergenceRule(rel_tol=0.05, abs_tol=0.01, n_min=64, n_max=4000, batch_size=64)
    terms = []
    experiment = chsh_experiment(
        settings,
        replace(base_spec, convergence=rule, dynamics=SingletStub()),
        on_term=lambda label, est: terms.append(label),
    )
    assert terms == ["ab", "a'b", "ab'", "a'b'"]
    assert experiment.result.s_value == pytest.approx(-2.0 * math.sqrt(2.0), abs=0.3)
    assert experiment.verdict.verdict == VIOLATED
    assert experiment.result.notes == ()
