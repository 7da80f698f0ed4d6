#!/usr/bin/env python3
"""
Free-surface wave model over piecewise-constant bathymetry.

The surface elevation eta and surface potential phi obey

    d(eta)/dt = w + 2 nu eta_xx
    d(phi)/dt = -g(t) eta + (sigma/rho) eta_xx + 2 nu phi_xx - P/rho

with g(t) = g0 (1 - Gamma sin(omega t)). The vertical surface velocity w is the
Dirichlet-to-Neumann (DtN) map of phi, obtained from a discrete Laplace problem on
a terrain-following grid with nz levels per column. The Schur complement of that
problem onto the surface nodes is factorized once per (topography, grid) and stored
as a dense matrix.

Grid points are cell centers x_i = (i + 1/2) dx with reflecting end walls.
"""

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import BinaryIO, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from geometry import Topography, depth_at
from logger_config import get_logger
from sim_errors import BracketError, ConfigurationError, DivergenceError, DomainError, SingularOperatorError
from timestepping import RK4, StabilityReport, stability_report, validate_stability

logger = get_logger("wavefield")

MIN_POINTS_PER_WAVELENGTH = 32
MIN_SIGMA_LEVELS = 4
SOLVE_CHUNK = 64


@dataclass(frozen=True)
class FluidParams:
    """
    Fluid and forcing parameters (CGS).

    gamma is the dimensionless forcing amplitude A0 omega^2 / g0.
    """

    rho: float = 0.95
    sigma: float = 20.9
    nu: float = 0.16
    g0: float = 981.0
    gamma: float = 4.23
    drive_frequency_hz: float = 80.0

    def __post_init__(self):
        for name in ("rho", "sigma", "nu", "g0", "drive_frequency_hz"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"fluid.{name}", f"must be a positive number, got {value!r}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigurationError("fluid.gamma", f"must be >= 0, got {self.gamma!r}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.drive_frequency_hz

    @property
    def faraday_period(self) -> float:
        """Period of the subharmonic response, twice the drive period."""
        return 2.0 / self.drive_frequency_hz

    @property
    def forcing_acceleration(self) -> float:
        """A0 omega^2 in cm/s^2."""
        return self.gamma * self.g0

    @property
    def sigma_over_rho(self) -> float:
        return self.sigma / self.rho

    def gravity(self, t: float) -> float:
        return self.g0 * (1.0 - self.gamma * math.sin(self.omega * t))

    def with_gamma(self, gamma: float) -> "FluidParams":
        return FluidParams(self.rho, self.sigma, self.nu, self.g0, gamma, self.drive_frequency_hz)


@dataclass(frozen=True)
class GridSettings:
    points_per_wavelength: float = 48.0
    faraday_wavelength: float = 0.475
    nz: int = 24
    steps_per_period: int = 512
    smoothing_cells: int = 0


@dataclass(frozen=True)
class Grid:
    nx: int
    dx: float
    nz: int
    dt: float
    steps_per_period: int
    faraday_period: float

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def length(self) -> float:
        return self.nx * self.dx


def _aligned(positions: Sequence[float], total: float, nx: int) -> bool:
    for b in positions:
        cells = b * nx / total
        if abs(cells - round(cells)) > 1e-6:
            return False
    return True


def build_grid(topo: Topography, settings: GridSettings, fluid: FluidParams) -> Grid:
    """
    Pick the coarsest grid at or below the target spacing that puts every segment
    boundary and wall cut on a cell face.
    """
    if settings.points_per_wavelength < MIN_POINTS_PER_WAVELENGTH:
        raise ConfigurationError(
            "grid.points_per_wavelength",
            f"must be >= {MIN_POINTS_PER_WAVELENGTH} (dx <= lambda_F/32), got {settings.points_per_wavelength}",
        )
    if int(settings.nz) != settings.nz or settings.nz < MIN_SIGMA_LEVELS:
        raise ConfigurationError(
            "grid.nz", f"need at least {MIN_SIGMA_LEVELS} vertical levels over every barrier, got {settings.nz}"
        )
    if int(settings.steps_per_period) != settings.steps_per_period or settings.steps_per_period < 1:
        raise ConfigurationError(
            "grid.steps_per_period", f"must be a positive integer, got {settings.steps_per_period}"
        )

    dx_target = settings.faraday_wavelength / settings.points_per_wavelength
    total = topo.total_length
    n0 = max(2, int(math.ceil(total / dx_target - 1e-9)))
    positions = list(topo.boundaries) + list(topo.cuts)
    for nx in range(n0, 64 * n0):
        if _aligned(positions, total, nx):
            break
    else:
        raise ConfigurationError(
            "grid.points_per_wavelength", "no grid spacing aligns with the segment boundaries"
        )

    dx = total / nx
    if dx > settings.faraday_wavelength / MIN_POINTS_PER_WAVELENGTH * (1.0 + 1e-12):
        raise ConfigurationError("grid.dx", f"dx={dx:.5f} cm exceeds lambda_F/32")

    period = fluid.faraday_period
    grid = Grid(
        nx=nx,
        dx=dx,
        nz=int(settings.nz),
        dt=period / int(settings.steps_per_period),
        steps_per_period=int(settings.steps_per_period),
        faraday_period=period,
    )
    logger.debug(f"Grid nx={grid.nx} dx={grid.dx:.6f} nz={grid.nz} dt={grid.dt:.3e}")
    return grid


def column_depths(topo: Topography, grid: Grid, smoothing_cells: int = 0) -> np.ndarray:
    """Fluid depth at each cell center, optionally smoothed by a moving average."""
    depths = np.array([depth_at(topo, x) for x in grid.x_centers])
    if smoothing_cells and smoothing_cells > 1:
        kernel = np.ones(int(smoothing_cells)) / int(smoothing_cells)
        padded = np.pad(depths, (len(kernel) // 2, len(kernel) - 1 - len(kernel) // 2), mode="edge")
        depths = np.convolve(padded, kernel, mode="valid")
        if topo.is_symmetric:
            half = grid.nx // 2
            depths[grid.nx - half:] = depths[:half][::-1]
    return depths


def cut_faces(topo: Topography, grid: Grid) -> Tuple[int, ...]:
    """Face indices f (between cells f-1 and f) that carry a solid wall."""
    return tuple(sorted(int(round(c / grid.dx)) for c in topo.cuts))


class Laplacian:
    """Second difference with reflecting walls at the ends and at cut faces."""

    def __init__(self, nx: int, dx: float, cuts: Iterable[int] = ()):
        self.nx = nx
        self.inv_dx2 = 1.0 / (dx * dx)
        self.inv_2dx = 0.5 / dx
        left = np.arange(nx) - 1
        right = np.arange(nx) + 1
        left[0] = 0
        right[-1] = nx - 1
        for f in cuts:
            if 0 < f < nx:
                left[f] = f
                right[f - 1] = f - 1
        self.left = left
        self.right = right

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return ((u[self.left] + u[self.right]) - 2.0 * u) * self.inv_dx2

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return (u[self.right] - u[self.left]) * self.inv_2dx


class DtnOperator:
    """
    Dirichlet-to-Neumann map bound to one (Topography, Grid) pair.

    apply(phi) returns the surface vertical velocity. On mirror-symmetric
    topography the map is evaluated as (M phi + R M R phi)/2 with R the reversal,
    which makes mirrored inputs give bitwise mirrored outputs.
    """

    def __init__(self, topo: Topography, grid: Grid, matrix: np.ndarray, depths: np.ndarray):
        self.topo = topo
        self.grid = grid
        self.matrix = matrix
        self.depths = depths
        self.symmetric = topo.is_symmetric and bool(np.array_equal(depths, depths[::-1]))
        self.laplacian = Laplacian(grid.nx, grid.dx, cut_faces(topo, grid))
        self._max_eigenvalue: Optional[float] = None

    def apply(self, phi: np.ndarray) -> np.ndarray:
        direct = self.matrix.dot(np.ascontiguousarray(phi))
        if not self.symmetric:
            return direct
        mirrored = self.matrix.dot(np.ascontiguousarray(phi[::-1]))[::-1]
        return 0.5 * (direct + mirrored)

    __call__ = apply

    @property
    def max_eigenvalue(self) -> float:
        if self._max_eigenvalue is None:
            n = self.matrix.shape[0]
            values = scipy.linalg.eigvalsh(self.matrix, subset_by_index=[n - 1, n - 1])
            self._max_eigenvalue = float(values[-1])
        return self._max_eigenvalue


def _interp_weights(ratio: float, m: int, nz: int) -> List[Tuple[int, float]]:
    """Linear interpolation weights for sample m of a face inside one column."""
    p = m * ratio
    k0 = int(math.floor(p))
    if k0 >= nz:
        return [(nz, 1.0)]
    t = p - k0
    if t == 0.0:
        return [(k0, 1.0)]
    return [(k0, 1.0 - t), (k0 + 1, t)]


def _assemble_stiffness(depths: np.ndarray, dx: float, nz: int, skip_faces: Iterable[int]):
    nx = len(depths)
    stride = nz + 1
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    # Vertical links: dx/dz per column and level
    col_index = np.arange(nx) * stride
    vertical = dx / (depths / nz)
    for k in range(nz):
        a = col_index + k
        b = a + 1
        rows += [a, b, a, b]
        cols += [a, b, b, a]
        vals += [vertical, vertical, -vertical, -vertical]

    # Horizontal links: trapezoidal samples over the shared wet height of each face
    skip = set(skip_faces)
    h_rows: List[int] = []
    h_cols: List[int] = []
    h_vals: List[float] = []
    for f in range(1, nx):
        if f in skip:
            continue
        i, j = f - 1, f
        h_face = min(depths[i], depths[j])
        ratio_i = h_face / depths[i]
        ratio_j = h_face / depths[j]
        for m in range(nz + 1):
            weight = h_face / nz * (0.5 if m in (0, nz) else 1.0)
            coeff = weight / dx
            link = [(j * stride + k, w) for k, w in _interp_weights(ratio_j, m, nz)]
            link += [(i * stride + k, -w) for k, w in _interp_weights(ratio_i, m, nz)]
            for n1, c1 in link:
                for n2, c2 in link:
                    h_rows.append(n1)
                    h_cols.append(n2)
                    h_vals.append(coeff * c1 * c2)

    rows.append(np.asarray(h_rows, dtype=np.int64))
    cols.append(np.asarray(h_cols, dtype=np.int64))
    vals.append(np.asarray(h_vals, dtype=float))
    size = nx * stride
    return scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()


def build_dtn(topo: Topography, grid: Grid, smoothing_cells: int = 0) -> DtnOperator:
    """
    Factorize the discrete Laplace problem and reduce it to the surface.

    Raises:
        ConfigurationError: If the grid has fewer than four vertical levels
        SingularOperatorError: If the interior factorization fails
    """
    if grid.nz < MIN_SIGMA_LEVELS:
        raise ConfigurationError("grid.nz", f"need at least {MIN_SIGMA_LEVELS} vertical levels, got {grid.nz}")

    depths = column_depths(topo, grid, smoothing_cells)
    nx, nz, dx = grid.nx, grid.nz, grid.dx
    stiffness = _assemble_stiffness(depths, dx, nz, cut_faces(topo, grid))

    stride = nz + 1
    all_nodes = np.arange(nx * stride)
    surface = all_nodes[::stride]
    interior = np.setdiff1d(all_nodes, surface)

    a_block = stiffness[interior][:, interior].tocsc()
    b_block = stiffness[interior][:, surface].tocsc()
    c_block = stiffness[surface][:, surface].toarray()

    try:
        lu = scipy.sparse.linalg.splu(a_block)
    except RuntimeError as e:
        raise SingularOperatorError(
            f"Laplace factorization failed: {e}",
            {"nx": nx, "nz": nz, "min_depth": float(depths.min()), "unknowns": len(interior)},
        ) from e

    schur = c_block.copy()
    b_transpose = b_block.T.tocsr()
    for start in range(0, nx, SOLVE_CHUNK):
        stop = min(start + SOLVE_CHUNK, nx)
        rhs = b_block[:, start:stop].toarray()
        schur[:, start:stop] -= b_transpose.dot(lu.solve(rhs))

    if not np.all(np.isfinite(schur)):
        raise SingularOperatorError("DtN reduction produced non-finite entries", {"nx": nx, "nz": nz})

    matrix = 0.5 * (schur + schur.T) / dx
    logger.info(
        f"Built DtN operator nx={nx} nz={nz} unknowns={len(interior)} "
        f"nnz={lu.L.nnz + lu.U.nnz} min_depth={depths.min():.4f}"
    )
    return DtnOperator(topo, grid, matrix, depths)


@lru_cache(maxsize=8)
def cached_dtn(topo: Topography, grid: Grid, smoothing_cells: int = 0) -> DtnOperator:
    """Process-local cache: topography is static within a run and shared by runs."""
    return build_dtn(topo, grid, smoothing_cells)


def check_stability(dtn: DtnOperator, fluid: FluidParams) -> StabilityReport:
    report = stability_report(
        dt=dtn.grid.dt,
        dtn_max=dtn.max_eigenvalue,
        dx=dtn.grid.dx,
        g0=fluid.g0,
        gamma=fluid.gamma,
        sigma_over_rho=fluid.sigma_over_rho,
        nu=fluid.nu,
    )
    return validate_stability(report)


@dataclass(eq=False)
class WaveState:
    eta: np.ndarray
    phi_s: np.ndarray
    t: float = 0.0
    n: int = 0

    @classmethod
    def rest(cls, grid: Grid) -> "WaveState":
        return cls(np.zeros(grid.nx), np.zeros(grid.nx), 0.0, 0)


def wave_tendencies(
    t: float,
    eta: np.ndarray,
    phi: np.ndarray,
    dtn: DtnOperator,
    fluid: FluidParams,
    pressure: Optional[np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    lap = dtn.laplacian
    lap_eta = lap(eta)
    deta = dtn.apply(phi) + (2.0 * fluid.nu) * lap_eta
    dphi = (-fluid.gravity(t)) * eta + fluid.sigma_over_rho * lap_eta + (2.0 * fluid.nu) * lap(phi)
    if pressure is not None:
        dphi = dphi - pressure / fluid.rho
    return deta, dphi


def _check_finite(eta: np.ndarray, n: int) -> None:
    peak = float(np.max(np.abs(eta)))
    if not math.isfinite(peak):
        raise DivergenceError(step=n, max_eta=peak)


def step(state: WaveState, dtn: DtnOperator, fluid: FluidParams, sources: Sequence = ()) -> WaveState:
    """
    Advance the droplet-free wave equations by one dt with frozen pressure sources.

    Sources are PressureSource objects evaluated at state.t.
    """
    grid = dtn.grid
    nx = grid.nx
    pressure = None
    if sources:
        xs = grid.x_centers
        pressure = np.zeros(nx)
        for src in sources:
            pressure = pressure + src.profile(xs)

    def rhs(t, y):
        deta, dphi = wave_tendencies(t, y[:nx], y[nx:], dtn, fluid, pressure)
        return np.concatenate((deta, dphi))

    y = RK4(rhs).step(np.concatenate((state.eta, state.phi_s)), state.t, grid.dt)
    n = state.n + 1
    _check_finite(y[:nx], n)
    return WaveState(eta=y[:nx], phi_s=y[nx:], t=n * grid.dt, n=n)


def slope_profile(eta: np.ndarray, dtn: DtnOperator) -> np.ndarray:
    return dtn.laplacian.gradient(eta)


def interpolate_cells(values: np.ndarray, x: float, dx: float) -> float:
    """Piecewise-linear interpolation of cell-centered values at x."""
    n = len(values)
    p = x / dx - 0.5
    i0 = int(math.floor(p))
    if i0 < 0:
        return float(values[0])
    if i0 >= n - 1:
        return float(values[n - 1])
    t = p - i0
    return float((1.0 - t) * values[i0] + t * values[i0 + 1])


def slope_at(state: WaveState, dtn: DtnOperator, x: float) -> float:
    """Centered-difference slope of eta interpolated to x."""
    if not (0.0 <= x <= dtn.grid.length * (1.0 + 1e-12)):
        raise DomainError(f"x={x} cm outside bath [0, {dtn.grid.length}]")
    return interpolate_cells(slope_profile(state.eta, dtn), x, dtn.grid.dx)


def wave_energy(eta: np.ndarray, phi: np.ndarray, dtn: DtnOperator, fluid: FluidParams) -> float:
    """Gravity + capillary + kinetic energy per unit density (reference gravity g0)."""
    dx = dtn.grid.dx
    potential = fluid.g0 * np.dot(eta, eta) - fluid.sigma_over_rho * np.dot(eta, dtn.laplacian(eta))
    kinetic = np.dot(phi, dtn.apply(phi))
    return float(0.5 * dx * (potential + kinetic))


class WaveSolver:
    """Droplet-free integrator used by calibration and the threshold search."""

    def __init__(self, dtn: DtnOperator, fluid: FluidParams):
        self.dtn = dtn
        self.fluid = fluid
        self.nx = dtn.grid.nx
        self._rk4 = RK4(self._rhs)

    def _rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        deta, dphi = wave_tendencies(t, y[: self.nx], y[self.nx:], self.dtn, self.fluid, None)
        return np.concatenate((deta, dphi))

    def advance(self, state: WaveState, n_steps: int, rescale_above: Optional[float] = None) -> WaveState:
        """
        Advance n_steps; if rescale_above is set the (linear) state is scaled back
        to unit peak whenever max|eta| exceeds it.
        """
        dt = self.dtn.grid.dt
        y = np.concatenate((state.eta, state.phi_s))
        n = state.n
        for _ in range(n_steps):
            y = self._rk4.step(y, n * dt, dt)
            n += 1
            peak = float(np.max(np.abs(y[: self.nx])))
            if not math.isfinite(peak):
                raise DivergenceError(step=n, max_eta=peak)
            if rescale_above is not None and peak > rescale_above:
                y = y / peak
        return WaveState(eta=y[: self.nx], phi_s=y[self.nx:], t=n * dt, n=n)

    def energy(self, state: WaveState) -> float:
        return wave_energy(state.eta, state.phi_s, self.dtn, self.fluid)


@dataclass(frozen=True)
class ThresholdEstimate:
    gamma: float
    lo: float
    hi: float
    width: float
    evaluations: Tuple[Tuple[float, float], ...] = field(default=())


def growth_rate(
    dtn: DtnOperator,
    fluid: FluidParams,
    gamma: float,
    horizon_periods: int = 30,
    perturbation: float = 1e-6,
    seed: int = 0,
) -> float:
    """
    Energy growth rate (1/s) between horizon/2 and horizon Faraday periods,
    strobed at whole periods so the forcing phase is the same at both samples.
    """
    grid = dtn.grid
    rng = np.random.default_rng(seed)
    state = WaveState(eta=perturbation * rng.standard_normal(grid.nx), phi_s=np.zeros(grid.nx))
    solver = WaveSolver(dtn, fluid.with_gamma(gamma))
    half = max(1, horizon_periods // 2)
    state = solver.advance(state, half * grid.steps_per_period)
    e1 = solver.energy(state)
    state = solver.advance(state, (horizon_periods - half) * grid.steps_per_period)
    e2 = solver.energy(state)
    if e1 <= 0.0 or e2 <= 0.0:
        return -math.inf
    return math.log(e2 / e1) / ((horizon_periods - half) * grid.faraday_period)


def faraday_threshold(
    topo: Topography,
    fluid: FluidParams,
    grid: Grid,
    bracket: Tuple[float, float] = (3.5, 6.0),
    tol: float = 0.05,
    horizon_periods: int = 30,
    seed: int = 0,
    dtn: Optional[DtnOperator] = None,
) -> ThresholdEstimate:
    """
    Bisect on Gamma between energy decay and growth.

    Returns the bracket midpoint once the bracket width drops below 2*tol.

    Raises:
        BracketError: If the growth rate has the same sign at both ends
    """
    dtn = dtn or cached_dtn(topo, grid)
    lo, hi = float(bracket[0]), float(bracket[1])
    evaluations = []

    def rate(g):
        r = growth_rate(dtn, fluid, g, horizon_periods=horizon_periods, seed=seed)
        evaluations.append((g, r))
        logger.info(f"Faraday bisection: gamma={g:.4f} growth_rate={r:+.4f} 1/s")
        return r

    rate_lo, rate_hi = rate(lo), rate(hi)
    if not (rate_lo < 0.0 < rate_hi):
        raise BracketError(lo, hi, rate_lo, rate_hi)

    while hi - lo >= 2.0 * tol:
        mid = 0.5 * (lo + hi)
        if rate(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return ThresholdEstimate(
        gamma=0.5 * (lo + hi), lo=lo, hi=hi, width=hi - lo, evaluations=tuple(evaluations)
    )


FIELD_HEADER = struct.Struct("<16s16sQdd")
FRAME_INDEX = struct.Struct("<Q")
LABEL_BYTES = 16


@dataclass(frozen=True)
class FieldDumpHeader:
    nx: int
    dx: float
    dt: float
    config_hash: str = ""
    tool_version: str = ""


def _label(name: str, value: str) -> bytes:
    raw = value.encode("ascii")
    if len(raw) > LABEL_BYTES:
        raise ValueError(f"{name} '{value}' is longer than {LABEL_BYTES} bytes")
    return raw.ljust(LABEL_BYTES, b"\0")


class FieldDumpWriter:
    """
    Little-endian binary eta stream.

    Layout: header (16-byte ASCII config hash, 16-byte ASCII tool version, both
    NUL padded, uint64 nx, float64 dx, float64 dt), then frames of
    (uint64 step, nx float64 values).
    """

    def __init__(
        self, path: Path, nx: int, dx: float, dt: float, config_hash: str = "", tool_version: str = ""
    ):
        header = FIELD_HEADER.pack(
            _label("config_hash", config_hash), _label("tool_version", tool_version), nx, dx, dt
        )
        self.path = Path(path)
        self.nx = nx
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh: Optional[BinaryIO] = open(self.path, "wb")
        self._fh.write(header)
        self.frames = 0

    def write_frame(self, step_index: int, eta: np.ndarray) -> None:
        if len(eta) != self.nx:
            raise ValueError(f"Frame has {len(eta)} values, expected {self.nx}")
        self._fh.write(FRAME_INDEX.pack(step_index))
        self._fh.write(np.asarray(eta, dtype="<f8").tobytes())
        self.frames += 1

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_field_dump(path: Path) -> Tuple[FieldDumpHeader, List[Tuple[int, np.ndarray]]]:
    data = Path(path).read_bytes()
    config_hash, tool_version, nx, dx, dt = FIELD_HEADER.unpack_from(data, 0)
    header = FieldDumpHeader(
        nx, dx, dt, config_hash.rstrip(b"\0").decode("ascii"), tool_version.rstrip(b"\0").decode("ascii")
    )
    offset = FIELD_HEADER.size
    frame_size = FRAME_INDEX.size + 8 * nx
    frames = []
    while offset + frame_size <= len(data):
        (step_index,) = FRAME_INDEX.unpack_from(data, offset)
        values = np.frombuffer(data, dtype="<f8", count=nx, offset=offset + FRAME_INDEX.size).copy()
        frames.append((step_index, values))
        offset += frame_size
    return header, frames
