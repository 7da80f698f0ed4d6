#!/usr/bin/env python3
"""
Droplet dynamics: contact force, horizontal trajectory, pressure source, measurement.

A droplet's state is kept in its side-local frame: s is the distance from the
outer wall of its own subsystem and u the velocity along that axis. For side A
this is the lab frame; for side B x = total_length - s and v = -u. Two mirrored
droplets therefore carry bitwise identical local states.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from geometry import (
    BARRIER,
    CAVITY_REGIONS,
    CENTRAL,
    Topography,
    classify,
    from_local,
    region_side,
    to_local,
)
from logger_config import get_logger
from sim_errors import ConfigurationError, DomainError, ModelViolationError
from timestepping import RK4

logger = get_logger("droplet")

SIDES = ("A", "B")


def mass_from_radius(radius: float, rho: float) -> float:
    return 4.0 / 3.0 * math.pi * radius ** 3 * rho


@dataclass(frozen=True)
class DropletParams:
    """
    Walker parameters (CGS).

    drag_coeff multiplies F(t) * dx/dt, so it carries units of s/cm.
    """

    mass: float = mass_from_radius(0.035, 0.95)
    drag_coeff: float = 0.17
    radius: float = 0.035
    contact_fraction: float = 0.25
    impact_phase: float = 0.0
    pressure_halfwidth: float = 0.07

    def __post_init__(self):
        for name in ("mass", "drag_coeff", "radius", "pressure_halfwidth"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"droplet.{name}", f"must be a positive number, got {value!r}")
        if not (0.0 < self.contact_fraction < 1.0):
            raise ConfigurationError(
                "droplet.contact_fraction", f"must lie in (0, 1), got {self.contact_fraction}"
            )
        if not math.isfinite(self.impact_phase):
            raise ConfigurationError("droplet.impact_phase", "must be finite")


def contact_phase(params: DropletParams, t: float, faraday_period: float) -> float:
    """Fraction of the bouncing period elapsed since the last impact, in [0, 1)."""
    tau = t / faraday_period - params.impact_phase / (2.0 * math.pi)
    return tau - math.floor(tau)


def contact_force(params: DropletParams, t: float, g0: float, faraday_period: float) -> float:
    """
    Half-sine contact pulse repeating every Faraday period.

    The pulse lasts contact_fraction of the period and its period-average equals m*g0.
    """
    tau = contact_phase(params, t, faraday_period)
    cf = params.contact_fraction
    if tau >= cf:
        return 0.0
    return (params.mass * g0 / cf) * (math.pi / 2.0) * math.sin(math.pi * tau / cf)


def raised_cosine(xs: np.ndarray, center: float, force: float, halfwidth: float) -> np.ndarray:
    """Compact bump of half-width w with integral equal to force."""
    offset = xs - center
    inside = np.abs(offset) < halfwidth
    profile = np.zeros_like(xs, dtype=float)
    if force == 0.0:
        return profile
    profile[inside] = (force / halfwidth) * 0.5 * (1.0 + np.cos(np.pi * offset[inside] / halfwidth))
    return profile


@dataclass(frozen=True)
class PressureSource:
    center: float
    force: float
    halfwidth: float

    def profile(self, xs: np.ndarray) -> np.ndarray:
        return raised_cosine(xs, self.center, self.force, self.halfwidth)


@dataclass(frozen=True)
class DropletState:
    side: str
    s: float
    u: float
    total_length: float
    last_cavity: Optional[str] = None
    t: float = 0.0

    @classmethod
    def at(cls, topo: Topography, side: str, x: float, v: float = 0.0, t: float = 0.0) -> "DropletState":
        """Build a state from lab-frame position and velocity."""
        if side not in SIDES:
            raise ConfigurationError("side", f"must be A or B, got {side!r}")
        s = to_local(topo, x, side)
        u = v if side == "A" else -v
        region = classify(topo, x)
        last = region if region in CAVITY_REGIONS else None
        return cls(side=side, s=s, u=u, total_length=topo.total_length, last_cavity=last, t=t)

    @classmethod
    def local(cls, topo: Topography, side: str, s: float, u: float = 0.0, t: float = 0.0) -> "DropletState":
        x = from_local(topo, s, side)
        region = classify(topo, x)
        last = region if region in CAVITY_REGIONS else None
        return cls(side=side, s=s, u=u, total_length=topo.total_length, last_cavity=last, t=t)

    @property
    def x(self) -> float:
        return self.s if self.side == "A" else self.total_length - self.s

    @property
    def v(self) -> float:
        return self.u if self.side == "A" else -self.u

    def mirrored(self) -> "DropletState":
        """Same local state on the opposite side."""
        other = "B" if self.side == "A" else "A"
        last = None
        if self.last_cavity is not None:
            last = self.last_cavity[:-1] + other
        return replace(self, side=other, last_cavity=last)


def region_of(topo: Topography, state: DropletState) -> str:
    """Classify a droplet and enforce that it stays inside its own subsystem."""
    try:
        region = classify(topo, state.x)
    except DomainError:
        raise ModelViolationError(state.side, state.x, "outside", state.t) from None
    if region == CENTRAL:
        raise ModelViolationError(state.side, state.x, region, state.t)
    side = region_side(region)
    if side is not None and side != state.side:
        raise ModelViolationError(state.side, state.x, region, state.t)
    return region


def droplet_acceleration(u: float, local_slope: float, force: float, params: DropletParams) -> float:
    return -(force / params.mass) * (local_slope + params.drag_coeff * u)


def trajectory_step(
    state: DropletState,
    slope: float,
    force: float,
    params: DropletParams,
    dt: float,
    topo: Topography,
) -> DropletState:
    """
    Advance one droplet by dt with RK4 under frozen slope and contact force.

    slope is the lab-frame surface slope at the droplet; B integrates in its
    local frame where the slope changes sign.

    Raises:
        ModelViolationError: If the droplet ends in the central region or outside the bath
    """
    if not all(math.isfinite(v) for v in (state.s, state.u, slope, force)):
        raise ValueError("trajectory_step requires finite inputs")
    local_slope = slope if state.side == "A" else -slope

    def rhs(_t, y):
        return np.array([y[1], droplet_acceleration(y[1], local_slope, force, params)])

    y = RK4(rhs).step(np.array([state.s, state.u]), state.t, dt)
    moved = replace(state, s=float(y[0]), u=float(y[1]), t=state.t + dt)
    region = region_of(topo, moved)
    if region in CAVITY_REGIONS:
        moved = replace(moved, last_cavity=region)
    return moved


def emit_pressure(state: DropletState, force: float, params: DropletParams) -> PressureSource:
    if force < 0:
        raise ValueError(f"Contact force must be >= 0, got {force}")
    return PressureSource(center=state.x, force=force, halfwidth=params.pressure_halfwidth)


def outcome_for(
    region: str, last_cavity: Optional[str], side: str = "?", x: float = float("nan"), t: Optional[float] = None
) -> int:
    if region == BARRIER:
        if last_cavity is None:
            raise ModelViolationError(side, x, region, t, detail="is over the detector barrier with no cavity history")
        region = last_cavity
    return -1 if region.startswith("inner") else +1


def measure(state: DropletState, topo: Topography) -> int:
    """
    Binary Bell outcome: -1 in the inner cavity, +1 in the outer cavity.

    Over the detector barrier the last visited cavity decides.
    """
    return outcome_for(region_of(topo, state), state.last_cavity, state.side, state.x, state.t)


@dataclass(frozen=True)
class TunnelingEvent:
    t: float
    direction: str  # "inner->outer" or "outer->inner"


def _cavity_kind(region: str) -> Optional[str]:
    if region in CAVITY_REGIONS:
        return region.split("_")[0]
    return None


class TunnelingDetector:
    """Incremental inner/outer transition tracker; barrier excursions that return are ignored."""

    def __init__(self):
        self.current: Optional[str] = None
        self.events: List[TunnelingEvent] = []

    def update(self, t: float, region: str) -> Optional[TunnelingEvent]:
        kind = _cavity_kind(region)
        if kind is None:
            return None
        event = None
        if self.current is not None and kind != self.current:
            event = TunnelingEvent(t=t, direction=f"{self.current}->{kind}")
            self.events.append(event)
        self.current = kind
        return event


def detect_tunneling(trajectory: Iterable[DropletState], topo: Topography) -> List[TunnelingEvent]:
    detector = TunnelingDetector()
    for state in trajectory:
        detector.update(state.t, classify(topo, state.x))
    return detector.events


def dwell_fractions(regions: Sequence[str]) -> Dict[str, float]:
    """Fraction of samples spent in inner cavity, outer cavity and over the barrier."""
    counts = {"inner": 0, "outer": 0, "barrier": 0}
    for region in regions:
        kind = _cavity_kind(region)
        counts[kind if kind is not None else "barrier"] += 1
    total = sum(counts.values())
    if total == 0:
        return {k: 0.0 for k in counts}
    return {k: v / total for k, v in counts.items()}
