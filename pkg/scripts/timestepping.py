#!/usr/bin/env python3
"""
Time integration for the coupled surface/droplet system.

Classes
-------

- `RK4` -- classical fourth-order Runge-Kutta on a flat state vector
- `StabilityReport` -- result of the pre-run stability check
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from logger_config import get_logger
from sim_errors import StabilityError

logger = get_logger("timestepping")

# Radius of a safe disc inside the RK4 stability region (the region reaches
# about 2.83 on the imaginary axis and 2.78 on the negative real axis)
RK4_STABILITY_LIMIT = 2.5

RhsFunction = Callable[[float, np.ndarray], np.ndarray]


class RK4:
    """
    4th order Runge-Kutta time-stepping.

    Parameters
    ----------

    rhs : callable
        rhs(t, y) -> dy/dt; y is a flat float64 array
    """

    def __init__(self, rhs: RhsFunction):
        self.rhs = rhs

    def step(self, y: np.ndarray, t: float, dt: float) -> np.ndarray:
        """
        Take a time-step of "dt" and return the new state.

        Stage times are t, t + dt/2, t + dt/2 and t + dt; every update is
        elementwise so mirror-symmetric states stay bitwise symmetric.
        """
        half = 0.5 * dt
        k1 = self.rhs(t, y)
        k2 = self.rhs(t + half, y + half * k1)
        k3 = self.rhs(t + half, y + half * k2)
        k4 = self.rhs(t + dt, y + dt * k3)
        return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

@dataclass(frozen=True)
class StabilityReport:
    dt: float
    omega_max: float
    damping_max: float
    index: float
    limit: float = RK4_STABILITY_LIMIT

    @property
    def stable(self) -> bool:
        return self.index < self.limit


def stability_report(
    dt: float,
    dtn_max: float,
    dx: float,
    g0: float,
    gamma: float,
    sigma_over_rho: float,
    nu: float,
) -> StabilityReport:
    """
    Bound the spectrum of the linearized wave system.

    The fastest oscillation comes from the largest DtN eigenvalue combined with
    the largest Laplacian eigenvalue (4/dx^2) under peak gravity g0(1+Gamma).
    Viscous terms contribute a real negative part 2*nu*4/dx^2.
    """
    lap_max = 4.0 / (dx * dx)
    omega_max = float(np.sqrt((g0 * (1.0 + abs(gamma)) + sigma_over_rho * lap_max) * dtn_max))
    damping_max = 2.0 * nu * lap_max
    index = float(np.hypot(dt * omega_max, dt * damping_max))
    return StabilityReport(dt=dt, omega_max=omega_max, damping_max=damping_max, index=index)


def validate_stability(report: StabilityReport) -> StabilityReport:
    if not report.stable:
        logger.error(f"Unstable time step: index={report.index:.3f} limit={report.limit}")
        raise StabilityError(report)
    logger.debug(
        f"Stability ok: dt={report.dt:.3e} omega_max={report.omega_max:.1f} "
        f"damping_max={report.damping_max:.1f} index={report.index:.3f}"
    )
    return report
