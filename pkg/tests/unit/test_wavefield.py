"""
Unit tests for the grid, the Dirichlet-to-Neumann operator and the wave solver.
"""

import math

import numpy as np
import pytest

from geometry import LayoutConfig, build_bath, flat_bath
from sim_errors import BracketError, ConfigurationError, DivergenceError, DomainError, StabilityError
from wavefield import (
    FieldDumpWriter,
    FluidParams,
    GridSettings,
    Laplacian,
    WaveSolver,
    WaveState,
    build_dtn,
    build_grid,
    check_stability,
    column_depths,
    faraday_threshold,
    read_field_dump,
    slope_at,
    step,
)

pytestmark = pytest.mark.unit

FLUID = FluidParams()
SMALL_GRID = GridSettings(points_per_wavelength=32, nz=8, steps_per_period=256)


@pytest.fixture(scope="module")
def flat_dtn():
    topo = flat_bath(2.0, 0.5)
    return build_dtn(topo, build_grid(topo, SMALL_GRID, FLUID))


@pytest.fixture(scope="module")
def symmetric_dtn():
    layout = LayoutConfig(cavity_length=0.5, barrier_width=0.2, central_length=0.2)
    topo = build_bath(0.099, 0.099, layout)
    return build_dtn(topo, build_grid(topo, SMALL_GRID, FLUID))


def test_faraday_period_is_twice_drive_period():
    """Test the subharmonic period for an 80 Hz drive."""
    assert math.isclose(FLUID.faraday_period, 0.025)


def test_grid_aligns_segment_boundaries():
    """Test every segment boundary falls on a cell face at or below the target spacing."""
    topo = build_bath(0.099, 0.11)
    settings = GridSettings()
    grid = build_grid(topo, settings, FLUID)
    assert grid.dx <= settings.faraday_wavelength / settings.points_per_wavelength + 1e-12
    for boundary in topo.boundaries:
        cells = boundary / grid.dx
        assert abs(cells - round(cells)) < 1e-6
    assert math.isclose(grid.dt, FLUID.faraday_period / settings.steps_per_period)


def test_grid_rejects_coarse_resolution():
    """Test dx above lambda_F/32 is refused."""
    with pytest.raises(ConfigurationError) as exc:
        build_grid(flat_bath(2.0, 0.5), GridSettings(points_per_wavelength=16), FLUID)
    assert exc.value.field == "grid.points_per_wavelength"


def test_grid_rejects_too_few_levels():
    """Test fewer than four sigma levels is refused."""
    with pytest.raises(ConfigurationError) as exc:
        build_grid(flat_bath(2.0, 0.5), GridSettings(nz=3), FLUID)
    assert exc.value.field == "grid.nz"


def test_column_depths_follow_topography(symmetric_dtn):
    """Test cell depths sample the piecewise-constant profile."""
    depths = symmetric_dtn.depths
    assert depths.max() == 0.5
    assert math.isclose(depths.min(), 0.045)
    assert np.array_equal(depths, depths[::-1])


def test_dtn_is_symmetric_positive_semidefinite(flat_dtn):
    """Test the reduced operator is symmetric with a non-negative spectrum."""
    matrix = flat_dtn.matrix
    assert np.allclose(matrix, matrix.T, atol=0.0)
    eigenvalues = np.linalg.eigvalsh(matrix)
    assert eigenvalues.min() > -1e-8 * eigenvalues.max()


def test_dtn_annihilates_constants(symmetric_dtn):
    """Test a uniform potential produces no vertical velocity."""
    ones = np.ones(symmetric_dtn.grid.nx)
    assert np.abs(symmetric_dtn.apply(ones)).max() < 1e-8 * symmetric_dtn.max_eigenvalue


def _rayleigh(dtn, mode_number):
    grid = dtn.grid
    k = mode_number * math.pi / grid.length
    mode = np.cos(k * grid.x_centers)
    return k, float(mode @ dtn.apply(mode)) / float(mode @ mode)


def test_dtn_matches_flat_bottom_symbol(flat_dtn):
    """Test a resolved cosine mode sees k tanh(k h) on a flat bottom within 1%."""
    k, rayleigh = _rayleigh(flat_dtn, 2)
    assert rayleigh == pytest.approx(k * math.tanh(k * 0.5), rel=0.01)


@pytest.mark.parametrize("mode_number", [2, 8, 20])
def test_dtn_matches_discrete_symbol(flat_dtn, mode_number):
    """Test cosine modes are eigenvectors with the closed-form symbol of the sigma-level ladder."""
    grid = flat_dtn.grid
    k, rayleigh = _rayleigh(flat_dtn, mode_number)
    mu = (2.0 / grid.dx * math.sin(0.5 * k * grid.dx)) ** 2
    dz = 0.5 / grid.nz
    theta = math.acosh(1.0 + 0.5 * mu * dz * dz)
    assert rayleigh == pytest.approx(math.sinh(theta) / dz * math.tanh(grid.nz * theta), rel=1e-8)


def test_dtn_is_linear(symmetric_dtn):
    """Test the operator applied to a combination equals the combination of the outputs."""
    rng = np.random.default_rng(5)
    phi1, phi2 = rng.standard_normal((2, symmetric_dtn.grid.nx))
    combined = symmetric_dtn.apply(2.5 * phi1 - 0.75 * phi2)
    separate = 2.5 * symmetric_dtn.apply(phi1) - 0.75 * symmetric_dtn.apply(phi2)
    scale = np.abs(separate).max()
    assert np.abs(combined - separate).max() <= 1e-12 * scale
    assert not symmetric_dtn.apply(np.zeros(symmetric_dtn.grid.nx)).any()


def test_dtn_mirror_equivariance_is_exact(symmetric_dtn):
    """Test reversed input gives the bitwise reversed output on symmetric topography."""
    assert symmetric_dtn.symmetric
    phi = np.random.default_rng(3).standard_normal(symmetric_dtn.grid.nx)
    assert np.array_equal(symmetric_dtn.apply(phi[::-1]), symmetric_dtn.apply(phi)[::-1])


def test_dtn_max_eigenvalue(flat_dtn):
    """Test the cached top eigenvalue matches a dense computation."""
    assert flat_dtn.max_eigenvalue == pytest.approx(np.linalg.eigvalsh(flat_dtn.matrix)[-1], rel=1e-8)


def test_laplacian_is_conservative_and_respects_cuts():
    """Test reflecting walls conserve the sum and cut faces block transport."""
    lap = Laplacian(10, 0.1, cuts=(5,))
    u = np.random.default_rng(0).standard_normal(10)
    assert abs(lap(u).sum()) < 1e-9
    spike = np.zeros(10)
    spike[4] = 1.0
    assert lap(spike)[5] == 0.0
    assert lap(spike)[3] > 0.0


def test_stability_validator_accepts_desk_step(flat_dtn):
    """Test the default time step sits inside the RK4 stability region."""
    report = check_stability(flat_dtn, FLUID)
    assert report.stable
    assert report.index < 2.5


def test_stability_validator_rejects_large_step():
    """Test a coarse time step is refused before any integration."""
    topo = flat_bath(2.0, 0.5)
    dtn = build_dtn(topo, build_grid(topo, GridSettings(points_per_wavelength=32, nz=8, steps_per_period=16), FLUID))
    with pytest.raises(StabilityError) as exc:
        check_stability(dtn, FLUID)
    assert exc.value.report.index > exc.value.report.limit


def test_unforced_energy_decays(flat_dtn):
    """Test viscous damping removes energy without forcing."""
    solver = WaveSolver(flat_dtn, FLUID.with_gamma(0.0))
    grid = flat_dtn.grid
    eta = 1e-3 * np.cos(8 * math.pi * grid.x_centers / grid.length)
    state = WaveState(eta=eta, phi_s=np.zeros(grid.nx))
    e0 = solver.energy(state)
    later = solver.advance(state, 4 * grid.steps_per_period)
    assert later.n == 4 * grid.steps_per_period
    assert 0.0 < solver.energy(later) < e0


def test_step_raises_on_non_finite_state(flat_dtn):
    """Test a non-finite surface raises DivergenceError."""
    grid = flat_dtn.grid
    eta = np.zeros(grid.nx)
    eta[3] = np.nan
    with pytest.raises(DivergenceError):
        step(WaveState(eta=eta, phi_s=np.zeros(grid.nx)), flat_dtn, FLUID)


def test_slope_at_outside_domain(flat_dtn):
    """Test slope queries outside the bath raise DomainError."""
    with pytest.raises(DomainError):
        slope_at(WaveState.rest(flat_dtn.grid), flat_dtn, -0.5)


def test_slope_of_linear_surface(flat_dtn):
    """Test the interpolated slope of a linear ramp away from the walls."""
    grid = flat_dtn.grid
    state = WaveState(eta=0.01 * grid.x_centers, phi_s=np.zeros(grid.nx))
    assert slope_at(state, flat_dtn, 1.0) == pytest.approx(0.01)


def test_threshold_bracket_without_sign_change(flat_dtn):
    """Test a bracket entirely below threshold raises BracketError."""
    with pytest.raises(BracketError) as exc:
        faraday_threshold(flat_dtn.topo, FLUID, flat_dtn.grid, bracket=(0.5, 1.0), horizon_periods=4, dtn=flat_dtn)
    assert exc.value.rate_lo < 0 and exc.value.rate_hi < 0


def test_field_dump_layout(temp_out_dir):
    """Test the binary dump header and frames."""
    path = temp_out_dir / "field.bin"
    with FieldDumpWriter(path, nx=4, dx=0.01, dt=1e-4) as writer:
        writer.write_frame(16, np.array([0.0, 1.0, 2.0, 3.0]))
        writer.write_frame(32, np.array([4.0, 5.0, 6.0, 7.0]))
    assert path.stat().st_size == 56 + 2 * (8 + 4 * 8)
    header, frames = read_field_dump(path)
    assert (header.nx, header.dx, header.dt) == (4, 0.01, 1e-4)
    assert (header.config_hash, header.tool_version) == ("", "")
    assert [i for i, _ in frames] == [16, 32]
    assert frames[1][1].tolist() == [4.0, 5.0, 6.0, 7.0]


def test_field_dump_header_carries_provenance(temp_out_dir):
    """Test the dump header records the config hash and tool version."""
    path = temp_out_dir / "field.bin"
    with FieldDumpWriter(path, nx=2, dx=0.02, dt=1e-4, config_hash="0123456789abcdef", tool_version="0.3.0") as w:
        w.write_frame(0, np.zeros(2))
    header, frames = read_field_dump(path)
    assert header.config_hash == "0123456789abcdef"
    assert header.tool_version == "0.3.0"
    assert len(frames) == 1
    with pytest.raises(ValueError):
        FieldDumpWriter(temp_out_dir / "g.bin", nx=2, dx=0.02, dt=1e-4, config_hash="x" * 17)


def test_field_dump_rejects_wrong_length(temp_out_dir):
    with FieldDumpWriter(temp_out_dir / "f.bin", nx=4, dx=0.01, dt=1e-4) as writer:
        with pytest.raises(ValueError):
            writer.write_frame(0, np.zeros(3))


def test_smoothing_keeps_symmetry(symmetric_dtn):
    """Test the optional moving-average smoothing keeps a symmetric profile symmetric."""
    smoothed = column_depths(symmetric_dtn.topo, symmetric_dtn.grid, smoothing_cells=3)
    raw = symmetric_dtn.depths
    assert np.array_equal(smoothed, smoothed[::-1])
    assert not np.array_equal(smoothed, raw)
    assert smoothed.min() == pytest.approx(raw.min())


def _forced_mode_history(points_per_wavelength, nz, steps_per_period, n_periods=10, samples_per_period=8):
    """Amplitude of a forced long cosine mode sampled at fixed times on a flat bottom."""
    topo = flat_bath(2.0, 0.5)
    settings = GridSettings(
        points_per_wavelength=points_per_wavelength,
        faraday_wavelength=0.5,
        nz=nz,
        steps_per_period=steps_per_period,
    )
    dtn = build_dtn(topo, build_grid(topo, settings, FLUID))
    grid = dtn.grid
    shape = np.cos(2.0 * math.pi * grid.x_centers / grid.length)
    solver = WaveSolver(dtn, FLUID.with_gamma(3.0))
    state = WaveState(eta=1e-3 * shape, phi_s=np.zeros(grid.nx))
    chunk = steps_per_period // samples_per_period
    history = []
    for _ in range(n_periods * samples_per_period):
        state = solver.advance(state, chunk)
        history.append(float(state.eta @ shape) / float(shape @ shape))
    return np.array(history)


@pytest.mark.slow
def test_forced_solution_converges_at_second_order():
    """Test halving dx, dz and dt shrinks the change of a 10-period forced solution fourfold."""
    coarse = _forced_mode_history(32, 8, 512)
    medium = _forced_mode_history(64, 16, 1024)
    fine = _forced_mode_history(128, 32, 2048)
    order = math.log2(np.linalg.norm(coarse - medium) / np.linalg.norm(medium - fine))
    assert order >= 1.9


@pytest.mark.slow
def test_threshold_rises_with_viscosity(flat_dtn):
    """Test doubling the viscosity gives a strictly larger Faraday threshold."""
    estimates = []
    for nu in (0.16, 0.32):
        fluid = FluidParams(nu=nu)
        estimates.append(
            faraday_threshold(
                flat_dtn.topo, fluid, flat_dtn.grid, bracket=(2.0, 12.0), tol=0.1, horizon_periods=20, dtn=flat_dtn
            )
        )
    thin, thick = estimates
    assert thin.gamma < thick.gamma
    assert thin.hi <= thick.lo
