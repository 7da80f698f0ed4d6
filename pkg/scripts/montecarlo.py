#!/usr/bin/env python3
"""
Monte Carlo estimation of the Bell correlation over randomized initial positions.

Every run derives its own seed from (master_seed, run_index); runs are executed
inline or on a process pool and merged in index order, so estimates do not depend
on the worker count. Runs are scheduled as one chunk of n_min followed by batches
of batch_size, with the stopping rule checked after each chunk.
"""

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from bellstats import (
    BoundVerdict,
    ChshResult,
    CorrelationEstimate,
    OutcomeCounts,
    bound_check,
    chsh,
    correlation_from_products,
    independence_pvalue,
)
from droplet import DropletParams
from geometry import BellSettings, LayoutConfig, Topography, build_bath, from_local, outer_cavity_length, outer_center_local
from logger_config import get_logger
from pilot_wave import CoupledSimulation, SimulationResult, initial_pair
from sim_errors import ConfigurationError, DivergenceError, ModelViolationError
from wavefield import FieldDumpWriter, FluidParams, GridSettings, build_grid, cached_dtn, check_stability

logger = get_logger("montecarlo")

INDEPENDENT = "independent"
MIRRORED = "mirrored"
SAMPLING_MODES = (INDEPENDENT, MIRRORED)
ERROR_ESTIMATORS = ("binomial", "batch")


@dataclass(frozen=True)
class ConvergenceRule:
    rel_tol: float = 0.03
    abs_tol: float = 0.03
    n_min: int = 40
    n_max: int = 5000
    batch_size: int = 8
    error_estimator: str = "binomial"

    def validate(self) -> None:
        if not (0.0 < self.rel_tol < 1.0):
            raise ConfigurationError("convergence.rel_tol", f"must lie in (0, 1), got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ConfigurationError("convergence.abs_tol", f"must be > 0, got {self.abs_tol}")
        if self.n_min < 1 or self.n_min > self.n_max:
            raise ConfigurationError(
                "convergence.n_min", f"need 1 <= n_min <= n_max, got n_min={self.n_min} n_max={self.n_max}"
            )
        if self.batch_size < 1:
            raise ConfigurationError("convergence.batch_size", f"must be >= 1, got {self.batch_size}")
        if self.error_estimator not in ERROR_ESTIMATORS:
            raise ConfigurationError(
                "convergence.error_estimator", f"must be one of {ERROR_ESTIMATORS}, got {self.error_estimator!r}"
            )

    def stop_reason(self, estimate: CorrelationEstimate) -> Optional[str]:
        """Relative rule first (ill-posed at m = 0), absolute fallback second."""
        if estimate.m_hat != 0.0 and estimate.std_error / abs(estimate.m_hat) < self.rel_tol:
            return "relative"
        if estimate.std_error < self.abs_tol:
            return "absolute"
        return None


@dataclass(frozen=True)
class PhysicsConfig:
    fluid: FluidParams = field(default_factory=FluidParams)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    droplet: DropletParams = field(default_factory=DropletParams)
    grid: GridSettings = field(default_factory=GridSettings)


class StubDynamics:
    """Outcome generator replacing the physics run; subclasses define probabilities()."""

    def probabilities(self, alpha: float, beta: float) -> Tuple[float, float, float, float]:
        raise NotImplementedError

    def outcome(self, alpha: float, beta: float, rng: np.random.Generator) -> Tuple[int, int]:
        p = self.probabilities(alpha, beta)
        r = rng.random()
        pairs = ((1, 1), (1, -1), (-1, 1), (-1, -1))
        cumulative = 0.0
        for pair, prob in zip(pairs, p):
            cumulative += prob
            if r < cumulative:
                return pair
        return pairs[-1]

    def describe(self) -> Dict:
        return {"type": type(self).__name__, **asdict(self)}


@dataclass(frozen=True)
class ProbabilityStub(StubDynamics):
    p_pp: float = 0.25
    p_pm: float = 0.25
    p_mp: float = 0.25
    p_mm: float = 0.25

    def probabilities(self, alpha, beta):
        return (self.p_pp, self.p_pm, self.p_mp, self.p_mm)


@dataclass(frozen=True)
class CorrelatedStub(StubDynamics):
    """Unbiased outcomes whose product has mean m."""

    m: float = 0.0

    def probabilities(self, alpha, beta):
        same, diff = (1.0 + self.m) / 4.0, (1.0 - self.m) / 4.0
        return (same, diff, diff, same)


@dataclass(frozen=True)
class SingletStub(StubDynamics):
    """Singlet statistics with the settings read as analyzer angles."""

    def probabilities(self, alpha, beta):
        c = math.cos(alpha - beta)
        return ((1.0 - c) / 4.0, (1.0 + c) / 4.0, (1.0 + c) / 4.0, (1.0 - c) / 4.0)


@dataclass(frozen=True)
class ConstantStub(StubDynamics):
    x_a: int = 1
    x_b: int = 1

    def probabilities(self, alpha, beta):
        return tuple(1.0 if pair == (self.x_a, self.x_b) else 0.0 for pair in ((1, 1), (1, -1), (-1, 1), (-1, -1)))


@dataclass(frozen=True)
class RunSpec:
    master_seed: int
    delta_lambda: float
    t_m: int
    alpha: float
    beta: float
    sampling_mode: str = INDEPENDENT
    convergence: ConvergenceRule = field(default_factory=ConvergenceRule)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    asymmetry_epsilon: float = 0.0
    dynamics: Optional[StubDynamics] = None

    def validate(self) -> None:
        if not (0 <= self.master_seed < 2 ** 64):
            raise ConfigurationError("experiment.master_seed", "must be an unsigned 64-bit integer")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigurationError("experiment.mode", f"must be one of {SAMPLING_MODES}, got {self.sampling_mode!r}")
        if int(self.t_m) != self.t_m or self.t_m < 1:
            raise ConfigurationError("experiment.t_m", f"must be an integer >= 1, got {self.t_m}")
        if self.delta_lambda < 0:
            raise ConfigurationError("experiment.delta_lambda", f"must be >= 0, got {self.delta_lambda}")
        if self.delta_lambda > self.physics.layout.cavity_length:
            raise ConfigurationError(
                "experiment.delta_lambda",
                f"{self.delta_lambda} cm exceeds the outer cavity length {self.physics.layout.cavity_length} cm",
            )
        if self.asymmetry_epsilon and self.sampling_mode != MIRRORED:
            raise ConfigurationError("experiment.asymmetry_epsilon", "only applies to mirrored sampling")
        self.convergence.validate()

    def topography(self) -> Topography:
        return build_bath(self.alpha, self.beta, self.physics.layout)

    def describe(self) -> Dict:
        data = asdict(replace(self, dynamics=None))
        data["dynamics"] = self.dynamics.describe() if self.dynamics is not None else {"type": "physics"}
        return data

    def spec_hash(self) -> str:
        canonical = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def derive_seed(master_seed: int, run_index: int) -> int:
    """First 8 bytes (little-endian) of sha256("master::index")."""
    digest = hashlib.sha256(f"{master_seed}::{run_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def check_seed_collisions(master_seed: int, n_runs: int) -> None:
    seeds = {derive_seed(master_seed, i) for i in range(n_runs)}
    if len(seeds) != n_runs:
        raise ConfigurationError(
            "experiment.master_seed", f"per-run seed collision among {n_runs} runs; choose another master seed"
        )


def sample_local_initials(
    mode: str,
    delta_lambda: float,
    topo: Topography,
    rng: np.random.Generator,
    asymmetry_epsilon: float = 0.0,
) -> Tuple[float, float]:
    """Initial distances of both droplets from their own outer walls."""
    if mode not in SAMPLING_MODES:
        raise ConfigurationError("experiment.mode", f"must be one of {SAMPLING_MODES}, got {mode!r}")
    half = 0.5 * delta_lambda
    for side in ("A", "B"):
        center = outer_center_local(topo, side)
        length = outer_cavity_length(topo, side)
        if delta_lambda < 0 or center - half < 0 or center + half > length:
            raise ConfigurationError(
                "experiment.delta_lambda",
                f"interval of width {delta_lambda} cm leaves the outer cavity of side {side}",
            )

    c_a = outer_center_local(topo, "A")
    c_b = outer_center_local(topo, "B")
    if mode == MIRRORED:
        u = rng.uniform(-half, half)
        s_a = c_a + u
        s_b = c_b + u + asymmetry_epsilon
    else:
        if asymmetry_epsilon:
            raise ConfigurationError("experiment.asymmetry_epsilon", "only applies to mirrored sampling")
        s_a = c_a + rng.uniform(-half, half)
        s_b = c_b + rng.uniform(-half, half)
    if asymmetry_epsilon:
        if not (0.0 < s_b < outer_cavity_length(topo, "B")):
            raise ConfigurationError("experiment.asymmetry_epsilon", "offset moves droplet B out of its cavity")
    return s_a, s_b


def sample_initials(
    mode: str,
    delta_lambda: float,
    topo: Topography,
    rng: np.random.Generator,
    asymmetry_epsilon: float = 0.0,
) -> Tuple[float, float]:
    """Lab-frame initial positions (x_A0, x_B0); mirrored draws satisfy x_B0 = mirror(x_A0)."""
    s_a, s_b = sample_local_initials(mode, delta_lambda, topo, rng, asymmetry_epsilon)
    return from_local(topo, s_a, "A"), from_local(topo, s_b, "B")


@dataclass
class RunOutcome:
    run_index: int
    seed: int
    x_a: Optional[int] = None
    x_b: Optional[int] = None
    tunnel_count: int = 0
    wall_time: float = 0.0
    failure_reason: Optional[str] = None
    diagnostics: Dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.failure_reason is not None

    @property
    def product(self) -> int:
        return self.x_a * self.x_b

    def to_record(self, spec_hash: str) -> Dict:
        return {
            "spec_hash": spec_hash,
            "run_index": self.run_index,
            "seed": self.seed,
            "X_A": self.x_a,
            "X_B": self.x_b,
            "tunnel_count": self.tunnel_count,
            "wall_time": round(self.wall_time, 6),
            "failure_reason": self.failure_reason,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_record(cls, record: Dict) -> "RunOutcome":
        return cls(
            run_index=int(record["run_index"]),
            seed=int(record["seed"]),
            x_a=record.get("X_A"),
            x_b=record.get("X_B"),
            tunnel_count=int(record.get("tunnel_count", 0)),
            wall_time=float(record.get("wall_time", 0.0)),
            failure_reason=record.get("failure_reason"),
            diagnostics=record.get("diagnostics", {}),
        )


def simulate(
    spec: RunSpec,
    run_index: int,
    record_every: int = 0,
    field_dump: Optional[FieldDumpWriter] = None,
    dump_every: int = 0,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SimulationResult:
    """Full coupled simulation for one run index (no failure handling)."""
    physics = spec.physics
    rng = np.random.default_rng(derive_seed(spec.master_seed, run_index))
    topo = spec.topography()
    s_a, s_b = sample_local_initials(spec.sampling_mode, spec.delta_lambda, topo, rng, spec.asymmetry_epsilon)
    grid = build_grid(topo, physics.grid, physics.fluid)
    dtn = cached_dtn(topo, grid, physics.grid.smoothing_cells)
    check_stability(dtn, physics.fluid)
    start_a, start_b = initial_pair(topo, s_a, s_b)
    sim = CoupledSimulation(topo, dtn, physics.fluid, physics.droplet)
    return sim.run(
        start_a, start_b, spec.t_m,
        record_every=record_every, field_dump=field_dump, dump_every=dump_every, progress=progress,
    )


def run_once(spec: RunSpec, run_index: int) -> RunOutcome:
    """
    One seeded run. Divergence and model violations mark the run failed with a
    reason; they are never dropped silently.
    """
    seed = derive_seed(spec.master_seed, run_index)
    started = time.perf_counter()
    if spec.dynamics is not None:
        rng = np.random.default_rng(seed)
        x_a, x_b = spec.dynamics.outcome(spec.alpha, spec.beta, rng)
        return RunOutcome(run_index, seed, x_a, x_b, 0, time.perf_counter() - started)
    try:
        result = simulate(spec, run_index)
    except (DivergenceError, ModelViolationError) as e:
        logger.warning(f"Run {run_index} failed: {e}")
        return RunOutcome(run_index, seed, wall_time=time.perf_counter() - started, failure_reason=str(e))
    return RunOutcome(
        run_index=run_index,
        seed=seed,
        x_a=result.outcome_a,
        x_b=result.outcome_b,
        tunnel_count=result.tunnel_count,
        wall_time=result.wall_time,
        diagnostics=result.diagnostics(),
    )


def _run_once_packed(args) -> RunOutcome:
    return run_once(*args)


class RunExecutor:
    """Runs seeded work items inline (workers=1) or on a process pool, preserving index order."""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ConfigurationError("workers", f"must be >= 1, got {workers}")
        self.workers = int(workers)
        self._pool: Optional[ProcessPoolExecutor] = None

    def __enter__(self) -> "RunExecutor":
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def map(self, spec: RunSpec, indices: Sequence[int]) -> List[RunOutcome]:
        if self._pool is None:
            return [run_once(spec, i) for i in indices]
        return list(self._pool.map(_run_once_packed, [(spec, i) for i in indices]))


@dataclass
class MonteCarloEstimate:
    spec_hash: str
    estimate: Optional[CorrelationEstimate]
    counts: OutcomeCounts
    n_attempted: int
    n_failed: int
    converged: bool
    stop_reason: str
    outcomes: List[RunOutcome] = field(default_factory=list)

    @property
    def m_hat(self) -> float:
        return self.estimate.m_hat if self.estimate else float("nan")

    @property
    def std_error(self) -> float:
        return self.estimate.std_error if self.estimate else float("nan")

    @property
    def n_samples(self) -> int:
        return self.estimate.n_samples if self.estimate else 0

    @property
    def wall_time(self) -> float:
        return sum(o.wall_time for o in self.outcomes)

    def independence_pvalue(self) -> float:
        return independence_pvalue(self.counts)


def _run_chunk(spec, spec_hash, indices, executor, ledger) -> List[RunOutcome]:
    done: Dict[int, RunOutcome] = {}
    if ledger is not None:
        for i in indices:
            record = ledger.get(spec_hash, i)
            if record is not None:
                done[i] = RunOutcome.from_record(record)
    pending = [i for i in indices if i not in done]
    if pending:
        fresh = executor.map(spec, pending)
        if ledger is not None:
            ledger.append_many(o.to_record(spec_hash) for o in fresh)
        done.update((o.run_index, o) for o in fresh)
    return [done[i] for i in indices]


def estimate_M(
    spec: RunSpec,
    executor: Optional[RunExecutor] = None,
    ledger=None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> MonteCarloEstimate:
    """
    Run until the stopping rule fires on the successful runs or n_max runs were
    attempted. Unconverged results are flagged, not raised.
    """
    spec.validate()
    rule = spec.convergence
    check_seed_collisions(spec.master_seed, rule.n_max)
    spec_hash = spec.spec_hash()
    if executor is None:
        with RunExecutor(1) as inline:
            return estimate_M(spec, inline, ledger, progress)

    outcomes: List[RunOutcome] = []
    products: List[int] = []
    estimate: Optional[CorrelationEstimate] = None
    n_failed = 0
    stop_reason = "max_runs"
    converged = False
    chunk = rule.n_min

    while len(outcomes) < rule.n_max:
        start = len(outcomes)
        indices = list(range(start, min(start + chunk, rule.n_max)))
        for outcome in _run_chunk(spec, spec_hash, indices, executor, ledger):
            outcomes.append(outcome)
            if outcome.failed:
                n_failed += 1
            else:
                products.append(outcome.product)
        chunk = rule.batch_size
        if progress is not None:
            progress(len(outcomes), rule.n_max)
        if not products:
            continue
        estimate = correlation_from_products(products, rule.error_estimator, rule.batch_size)
        if len(products) >= rule.n_min:
            reason = rule.stop_reason(estimate)
            if reason is not None:
                stop_reason, converged = reason, True
                break

    counts = OutcomeCounts.from_outcomes((o.x_a, o.x_b) for o in outcomes if not o.failed)
    if not converged:
        logger.warning(f"Spec {spec_hash} not converged after {len(outcomes)} runs ({n_failed} failed)")
    if n_failed:
        logger.warning(f"Spec {spec_hash}: {n_failed} of {len(outcomes)} runs failed and were excluded")
    logger.info(
        f"Estimate spec={spec_hash} m_hat={estimate.m_hat if estimate else float('nan'):.4f} "
        f"n={len(products)} stop={stop_reason}"
    )
    return MonteCarloEstimate(
        spec_hash=spec_hash,
        estimate=estimate,
        counts=counts,
        n_attempted=len(outcomes),
        n_failed=n_failed,
        converged=converged,
        stop_reason=stop_reason,
        outcomes=outcomes,
    )


@dataclass(frozen=True)
class SweepRow:
    sweep_var: float
    t_m: int
    m_hat: float
    std_error: float
    n_samples: int
    n_failed: int
    converged: bool
    stop_reason: str
    wall_time: float = 0.0

    @classmethod
    def from_estimate(cls, value: float, t_m: int, est: MonteCarloEstimate) -> "SweepRow":
        return cls(
            value, t_m, est.m_hat, est.std_error, est.n_samples, est.n_failed, est.converged, est.stop_reason,
            est.wall_time,
        )


@dataclass
class SweepTable:
    variable: str
    rows: List[SweepRow] = field(default_factory=list)

    @property
    def unconverged(self) -> int:
        return sum(1 for r in self.rows if not r.converged)


def sweep_dlambda(
    base: RunSpec,
    dlambda_grid: Sequence[float],
    t_m_list: Sequence[int],
    executor: Optional[RunExecutor] = None,
    ledger=None,
    on_row: Optional[Callable[[SweepRow], None]] = None,
) -> SweepTable:
    """One estimate per (T_m, delta_lambda) cell, T_m outermost."""
    if not dlambda_grid or not t_m_list:
        raise ConfigurationError("experiment.delta_lambda_grid", "sweep grids must be non-empty")
    table = SweepTable(variable="delta_lambda")
    for t_m in t_m_list:
        for dl in dlambda_grid:
            est = estimate_M(replace(base, delta_lambda=float(dl), t_m=int(t_m)), executor, ledger)
            row = SweepRow.from_estimate(float(dl), int(t_m), est)
            table.rows.append(row)
            if on_row is not None:
                on_row(row)
    return table


def sweep_alpha(
    base: RunSpec,
    alpha_grid: Sequence[float],
    executor: Optional[RunExecutor] = None,
    ledger=None,
    on_row: Optional[Callable[[SweepRow], None]] = None,
) -> SweepTable:
    """One estimate of M(alpha, alpha) per grid value."""
    if not alpha_grid:
        raise ConfigurationError("experiment.alpha_grid", "sweep grid must be non-empty")
    table = SweepTable(variable="alpha")
    for alpha in alpha_grid:
        est = estimate_M(replace(base, alpha=float(alpha), beta=float(alpha)), executor, ledger)
        row = SweepRow.from_estimate(float(alpha), base.t_m, est)
        table.rows.append(row)
        if on_row is not None:
            on_row(row)
    return table


@dataclass
class ChshExperiment:
    result: ChshResult
    verdict: BoundVerdict
    estimates: Dict[str, MonteCarloEstimate]
    settings: BellSettings


def chsh_experiment(
    settings: BellSettings,
    base: RunSpec,
    executor: Optional[RunExecutor] = None,
    ledger=None,
    on_term: Optional[Callable[[str, MonteCarloEstimate], None]] = None,
) -> ChshExperiment:
    """Estimate M for (a,b), (a',b), (a,b'), (a',b') and combine into S."""
    estimates: Dict[str, MonteCarloEstimate] = {}
    notes: List[str] = []
    for label, alpha, beta in settings.pairs():
        est = estimate_M(replace(base, alpha=alpha, beta=beta), executor, ledger)
        if est.estimate is None:
            raise ConfigurationError("experiment", f"every run failed for setting pair {label}")
        if not est.converged:
            notes.append(f"M({label}) unconverged after {est.n_attempted} runs; s_error understates uncertainty")
        estimates[label] = est
        if on_term is not None:
            on_term(label, est)
    result = chsh(*(estimates[label].estimate for label, _, _ in settings.pairs()), notes=notes)
    return ChshExperiment(result=result, verdict=bound_check(result), estimates=estimates, settings=settings)
