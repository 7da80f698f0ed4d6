#!/usr/bin/env python3
"""
Bath topography: the five-cavity layout with submerged detector and coupling barriers.

All lengths are in cm. Segments are half-open intervals [start, end) ordered left to
right; the last segment also owns x = total_length. Subsystem A lives on the left,
subsystem B on the right, and each droplet can be described in a side-local frame
measured from its own outer wall.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional, Tuple

from logger_config import get_logger
from sim_errors import ConfigurationError, DomainError

logger = get_logger("geometry")

OUTER_CAVITY = "outer_cavity"
INNER_CAVITY = "inner_cavity"
DETECTOR_BARRIER = "detector_barrier"
COUPLING_BARRIER = "coupling_barrier"
CENTRAL_CAVITY = "central_cavity"

SEGMENT_KINDS = (OUTER_CAVITY, INNER_CAVITY, DETECTOR_BARRIER, COUPLING_BARRIER, CENTRAL_CAVITY)

# Region labels returned by classify()
INNER_A = "inner_A"
OUTER_A = "outer_A"
INNER_B = "inner_B"
OUTER_B = "outer_B"
BARRIER = "barrier"
CENTRAL = "central"

CAVITY_REGIONS = (INNER_A, OUTER_A, INNER_B, OUTER_B)

STANDARD_ORDER = (
    ("outer_A", OUTER_CAVITY, "A"),
    ("detector_A", DETECTOR_BARRIER, "A"),
    ("inner_A", INNER_CAVITY, "A"),
    ("coupling_L", COUPLING_BARRIER, None),
    ("central", CENTRAL_CAVITY, None),
    ("coupling_R", COUPLING_BARRIER, None),
    ("inner_B", INNER_CAVITY, "B"),
    ("detector_B", DETECTOR_BARRIER, "B"),
    ("outer_B", OUTER_CAVITY, "B"),
)


@dataclass(frozen=True)
class Segment:
    name: str
    length: float
    fluid_depth: float
    kind: str
    side: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ConfigurationError("kind", f"unknown segment kind '{self.kind}'")
        if not self.length > 0:
            raise ConfigurationError(f"{self.name}.length", f"must be > 0, got {self.length}")
        if not self.fluid_depth > 0:
            raise ConfigurationError(f"{self.name}.fluid_depth", f"must be > 0, got {self.fluid_depth}")


@dataclass(frozen=True)
class LayoutConfig:
    """Published layout; central_depth is not given in the source and stays configurable."""

    cavity_length: float = 1.0
    cavity_depth: float = 0.5
    barrier_width: float = 0.4
    coupling_depth: float = 0.045
    central_length: float = 0.4
    central_depth: float = 0.5
    decoupled: bool = False


@dataclass(frozen=True)
class Topography:
    segments: Tuple[Segment, ...]
    total_length: float
    starts: Tuple[float, ...]
    # Positions of solid walls that block horizontal wave transmission
    cuts: Tuple[float, ...] = field(default=())

    @property
    def is_standard(self) -> bool:
        return len(self.segments) == len(STANDARD_ORDER)

    @property
    def is_symmetric(self) -> bool:
        """True when the depth profile and the cut set are mirror-symmetric."""
        n = len(self.segments)
        for i in range(n // 2 + 1):
            left, right = self.segments[i], self.segments[n - 1 - i]
            if left.length != right.length or left.fluid_depth != right.fluid_depth:
                return False
        mirrored = sorted(self.total_length - c for c in self.cuts)
        return all(math.isclose(a, b, abs_tol=1e-12) for a, b in zip(sorted(self.cuts), mirrored))

    def segment_end(self, index: int) -> float:
        if index == len(self.segments) - 1:
            return self.total_length
        return self.starts[index + 1]

    def segment_named(self, name: str) -> Tuple[int, Segment]:
        for i, seg in enumerate(self.segments):
            if seg.name == name:
                return i, seg
        raise KeyError(name)

    @property
    def boundaries(self) -> Tuple[float, ...]:
        """Interior segment boundaries."""
        return self.starts[1:]


def _assemble(segments, cuts=()) -> Topography:
    starts = tuple(math.fsum(s.length for s in segments[:i]) for i in range(len(segments)))
    total = math.fsum(s.length for s in segments)
    return Topography(segments=tuple(segments), total_length=total, starts=starts, cuts=tuple(cuts))


def _check_depth(name: str, value: float, cavity_depth: float) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ConfigurationError(name, f"must be a finite number, got {value!r}")
    if value <= 0:
        raise ConfigurationError(name, f"barrier depth must be > 0 cm, got {value}")
    if value >= cavity_depth:
        raise ConfigurationError(
            name, f"barrier depth {value} cm must be smaller than the cavity depth {cavity_depth} cm"
        )


def build_bath(alpha: float, beta: float, layout: Optional[LayoutConfig] = None) -> Topography:
    """
    Build the nine-segment bath for detector depths (alpha, beta).

    Args:
        alpha: Fluid depth over the left detector barrier (cm)
        beta: Fluid depth over the right detector barrier (cm)
        layout: Cavity/barrier dimensions (defaults to the published layout)

    Returns:
        Topography ordered outer_A ... outer_B

    Raises:
        ConfigurationError: If a depth is non-positive or not below the cavity depth
    """
    layout = layout or LayoutConfig()
    for name in ("cavity_length", "cavity_depth", "barrier_width", "central_length", "central_depth"):
        value = getattr(layout, name)
        if not value > 0:
            raise ConfigurationError(f"geometry.{name}", f"must be > 0, got {value}")
    _check_depth("alpha", alpha, layout.cavity_depth)
    _check_depth("beta", beta, layout.cavity_depth)
    _check_depth("geometry.coupling_depth", layout.coupling_depth, layout.cavity_depth)

    dims = {
        OUTER_CAVITY: (layout.cavity_length, layout.cavity_depth),
        INNER_CAVITY: (layout.cavity_length, layout.cavity_depth),
        COUPLING_BARRIER: (layout.barrier_width, layout.coupling_depth),
        CENTRAL_CAVITY: (layout.central_length, layout.central_depth),
    }
    segments = []
    for name, kind, side in STANDARD_ORDER:
        if kind == DETECTOR_BARRIER:
            length, depth = layout.barrier_width, alpha if side == "A" else beta
        else:
            length, depth = dims[kind]
        segments.append(Segment(name=name, length=length, fluid_depth=depth, kind=kind, side=side))

    topo = _assemble(segments)
    if layout.decoupled:
        i_left, _ = topo.segment_named("coupling_L")
        i_right, _ = topo.segment_named("coupling_R")
        topo = _assemble(segments, cuts=(topo.starts[i_left], topo.segment_end(i_right)))
    logger.debug(
        f"Built bath alpha={alpha} beta={beta} total_length={topo.total_length} "
        f"decoupled={layout.decoupled}"
    )
    return topo


def flat_bath(length: float, depth: float) -> Topography:
    """Single-segment bath used by the wave oracles."""
    return _assemble([Segment(name="flat", length=length, fluid_depth=depth, kind=OUTER_CAVITY, side="A")])


def _check_domain(topo: Topography, x: float) -> None:
    if not (0.0 <= x <= topo.total_length):
        raise DomainError(f"x={x} cm outside bath [0, {topo.total_length}]")


def segment_index(topo: Topography, x: float) -> int:
    _check_domain(topo, x)
    return min(bisect_right(topo.starts, x) - 1, len(topo.segments) - 1)


def depth_at(topo: Topography, x: float) -> float:
    """Fluid depth of the segment containing x (segments are [start, end))."""
    return topo.segments[segment_index(topo, x)].fluid_depth


def mirror(topo: Topography, x: float) -> float:
    _check_domain(topo, x)
    return topo.total_length - x


def classify(topo: Topography, x: float) -> str:
    """
    Region label used by the measurement.

    Coupling barriers belong to the central region: droplets are never allowed there.
    """
    seg = topo.segments[segment_index(topo, x)]
    if seg.kind == DETECTOR_BARRIER:
        return BARRIER
    if seg.kind in (COUPLING_BARRIER, CENTRAL_CAVITY):
        return CENTRAL
    prefix = "inner" if seg.kind == INNER_CAVITY else "outer"
    return f"{prefix}_{seg.side}"


def to_local(topo: Topography, x: float, side: str) -> float:
    """Distance of x from the outer wall of the given side."""
    _check_domain(topo, x)
    return x if side == "A" else topo.total_length - x


def from_local(topo: Topography, s: float, side: str) -> float:
    return s if side == "A" else topo.total_length - s


def outer_center_local(topo: Topography, side: str) -> float:
    """Local coordinate of the center of the side's outer cavity."""
    seg = topo.segments[0] if side == "A" else topo.segments[-1]
    return seg.length / 2.0


def outer_cavity_length(topo: Topography, side: str) -> float:
    seg = topo.segments[0] if side == "A" else topo.segments[-1]
    return seg.length


def region_side(region: str) -> Optional[str]:
    if region in CAVITY_REGIONS:
        return region[-1]
    return None


@dataclass(frozen=True)
class BellSettings:
    """Candidate detector depths: (a, a') on the left, (b, b') on the right."""

    a: float = 0.099
    a_prime: float = 0.11
    b: float = 0.099
    b_prime: float = 0.11

    def validate(self, cavity_depth: float) -> None:
        for name in ("a", "a_prime", "b", "b_prime"):
            _check_depth(f"settings.{name}", getattr(self, name), cavity_depth)

    def pairs(self):
        """Setting pairs in the order M(a,b), M(a',b), M(a,b'), M(a',b')."""
        return (
            ("ab", self.a, self.b),
            ("a'b", self.a_prime, self.b),
            ("ab'", self.a, self.b_prime),
            ("a'b'", self.a_prime, self.b_prime),
        )
