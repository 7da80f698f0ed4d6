#!/usr/bin/env python3
"""
Coupled wave + two-droplet simulation.

One RK4 step advances (eta, phi, s_A, u_A, s_B, u_B) together so droplets and
waves share the same stage times. Droplet B is integrated in its local frame
against the reversed surface, and its pressure profile is built in that frame
and reversed back; with mirror-symmetric topography and mirrored initial states
the whole run is exactly mirror-symmetric.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from droplet import (
    DropletParams,
    DropletState,
    TunnelingDetector,
    TunnelingEvent,
    contact_force,
    droplet_acceleration,
    dwell_fractions,
    measure,
    raised_cosine,
    region_of,
)
from geometry import CAVITY_REGIONS, Topography
from logger_config import get_logger
from sim_errors import DivergenceError
from timestepping import RK4
from wavefield import DtnOperator, FieldDumpWriter, FluidParams, Grid, WaveState, interpolate_cells, wave_tendencies

logger = get_logger("pilot_wave")


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    x_a: float
    v_a: float
    x_b: float
    v_b: float


@dataclass
class SimulationResult:
    droplet_a: DropletState
    droplet_b: DropletState
    outcome_a: int
    outcome_b: int
    wave: WaveState
    events_a: List[TunnelingEvent] = field(default_factory=list)
    events_b: List[TunnelingEvent] = field(default_factory=list)
    dwell_a: Dict[str, float] = field(default_factory=dict)
    dwell_b: Dict[str, float] = field(default_factory=dict)
    max_mirror_deviation: float = 0.0
    mean_speed: float = 0.0
    trajectory: List[TrajectorySample] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def tunnel_count(self) -> int:
        return len(self.events_a) + len(self.events_b)

    def diagnostics(self) -> Dict:
        return {
            "tunnel_count_a": len(self.events_a),
            "tunnel_count_b": len(self.events_b),
            "dwell_a": self.dwell_a,
            "dwell_b": self.dwell_b,
            "max_mirror_deviation": self.max_mirror_deviation,
            "mean_speed": self.mean_speed,
            "max_eta": float(np.max(np.abs(self.wave.eta))),
        }


class CoupledSimulation:
    """
    Pilot-wave dynamics for two droplets in one bath.

    Parameters
    ----------

    topo : Topography
    dtn : DtnOperator bound to topo and its grid
    fluid : FluidParams
    droplet : DropletParams shared by both droplets
    """

    def __init__(self, topo: Topography, dtn: DtnOperator, fluid: FluidParams, droplet: DropletParams):
        self.topo = topo
        self.dtn = dtn
        self.grid: Grid = dtn.grid
        self.fluid = fluid
        self.droplet = droplet
        self.nx = self.grid.nx
        self.xs = self.grid.x_centers
        self._rk4 = RK4(self.rhs)

    def _pressure(self, s_a: float, s_b: float, force: float) -> Optional[np.ndarray]:
        if force == 0.0:
            return None
        w = self.droplet.pressure_halfwidth
        p_a = raised_cosine(self.xs, s_a, force, w)
        p_b = raised_cosine(self.xs, s_b, force, w)
        return p_a + p_b[::-1]

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        nx = self.nx
        eta = y[:nx]
        phi = y[nx: 2 * nx]
        s_a, u_a, s_b, u_b = y[2 * nx:]
        force = contact_force(self.droplet, t, self.fluid.g0, self.grid.faraday_period)

        deta, dphi = wave_tendencies(t, eta, phi, self.dtn, self.fluid, self._pressure(s_a, s_b, force))

        gradient = self.dtn.laplacian.gradient
        slope_a = interpolate_cells(gradient(eta), s_a, self.grid.dx)
        slope_b = interpolate_cells(gradient(eta[::-1]), s_b, self.grid.dx)
        droplets = np.array(
            [
                u_a,
                droplet_acceleration(u_a, slope_a, force, self.droplet),
                u_b,
                droplet_acceleration(u_b, slope_b, force, self.droplet),
            ]
        )
        return np.concatenate((deta, dphi, droplets))

    def run(
        self,
        start_a: DropletState,
        start_b: DropletState,
        n_periods: int,
        wave: Optional[WaveState] = None,
        record_every: int = 0,
        field_dump: Optional[FieldDumpWriter] = None,
        dump_every: int = 0,
        progress: Optional[Callable[[int, int], None]] = None,
    ) -> SimulationResult:
        """
        Integrate from t = 0 to n_periods Faraday periods and measure both droplets.

        Raises:
            DivergenceError: If the surface becomes non-finite
            ModelViolationError: If a droplet leaves its subsystem
        """
        started = time.perf_counter()
        grid = self.grid
        nx = self.nx
        dt = grid.dt
        n_steps = int(n_periods) * grid.steps_per_period
        wave = wave or WaveState.rest(grid)
        y = np.concatenate((wave.eta, wave.phi_s, [start_a.s, start_a.u, start_b.s, start_b.u]))
        n0 = wave.n

        state_a, state_b = start_a, start_b
        detector_a, detector_b = TunnelingDetector(), TunnelingDetector()
        regions_a = [region_of(self.topo, state_a)]
        regions_b = [region_of(self.topo, state_b)]
        detector_a.update(state_a.t, regions_a[0])
        detector_b.update(state_b.t, regions_b[0])
        deviation = abs(state_a.s - state_b.s)
        speed_sum = 0.0
        trajectory: List[TrajectorySample] = []
        if record_every:
            trajectory.append(TrajectorySample(0.0, state_a.x, state_a.v, state_b.x, state_b.v))

        for i in range(n_steps):
            n = n0 + i
            y = self._rk4.step(y, n * dt, dt)
            t = (n + 1) * dt
            peak = float(np.max(np.abs(y[:nx])))
            if not math.isfinite(peak):
                raise DivergenceError(step=n + 1, max_eta=peak)

            s_a, u_a, s_b, u_b = (float(v) for v in y[2 * nx:])
            state_a = DropletState(
                side="A", s=s_a, u=u_a, total_length=self.topo.total_length,
                last_cavity=state_a.last_cavity, t=t,
            )
            state_b = DropletState(
                side="B", s=s_b, u=u_b, total_length=self.topo.total_length,
                last_cavity=state_b.last_cavity, t=t,
            )
            region_a = region_of(self.topo, state_a)
            region_b = region_of(self.topo, state_b)
            if region_a in CAVITY_REGIONS and region_a != state_a.last_cavity:
                state_a = DropletState("A", s_a, u_a, self.topo.total_length, region_a, t)
            if region_b in CAVITY_REGIONS and region_b != state_b.last_cavity:
                state_b = DropletState("B", s_b, u_b, self.topo.total_length, region_b, t)
            detector_a.update(t, region_a)
            detector_b.update(t, region_b)
            regions_a.append(region_a)
            regions_b.append(region_b)

            deviation = max(deviation, abs(s_a - s_b))
            speed_sum += 0.5 * (abs(u_a) + abs(u_b))
            if record_every and (i + 1) % record_every == 0:
                trajectory.append(TrajectorySample(t, state_a.x, state_a.v, state_b.x, state_b.v))
            if field_dump is not None and dump_every and (i + 1) % dump_every == 0:
                field_dump.write_frame(n + 1, y[:nx])
            if progress is not None and (i + 1) % grid.steps_per_period == 0:
                progress(i + 1, n_steps)

        final_wave = WaveState(eta=y[:nx].copy(), phi_s=y[nx: 2 * nx].copy(), t=(n0 + n_steps) * dt, n=n0 + n_steps)
        result = SimulationResult(
            droplet_a=state_a,
            droplet_b=state_b,
            outcome_a=measure(state_a, self.topo),
            outcome_b=measure(state_b, self.topo),
            wave=final_wave,
            events_a=list(detector_a.events),
            events_b=list(detector_b.events),
            dwell_a=dwell_fractions(regions_a),
            dwell_b=dwell_fractions(regions_b),
            max_mirror_deviation=deviation,
            mean_speed=speed_sum / n_steps if n_steps else 0.0,
            trajectory=trajectory,
            wall_time=time.perf_counter() - started,
        )
        logger.debug(
            f"Run finished: X_A={result.outcome_a} X_B={result.outcome_b} "
            f"tunnels={result.tunnel_count} deviation={deviation:.3e} wall={result.wall_time:.2f}s"
        )
        return result


def initial_pair(topo: Topography, s_a: float, s_b: float) -> Tuple[DropletState, DropletState]:
    """Droplets at rest at local positions s_a and s_b."""
    return DropletState.local(topo, "A", s_a), DropletState.local(topo, "B", s_b)
