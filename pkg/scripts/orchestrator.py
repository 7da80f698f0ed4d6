#!/usr/bin/env python3
"""
Hydrodynamic Bell Test - Experiment Orchestrator

Loads and validates run configurations, builds the physics objects they
describe and runs the single-run, sweep, CHSH and calibration workflows.
"""

import copy
import hashlib
import json
import os
import re
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent
sys.path.insert(0, str(scripts_dir))

from artifacts import (
    RunLedger,
    write_chsh_csv,
    write_json_atomic,
    write_sweep_csv,
    write_trajectory_csv,
)
from calibration import CalibrationReport, CalibrationSettings, calibration_report
from droplet import DropletParams, mass_from_radius
from geometry import BellSettings, LayoutConfig
from logger_config import get_logger
from montecarlo import (
    ChshExperiment,
    ConstantStub,
    ConvergenceRule,
    CorrelatedStub,
    PhysicsConfig,
    ProbabilityStub,
    RunExecutor,
    RunSpec,
    SingletStub,
    SweepTable,
    chsh_experiment,
    derive_seed,
    simulate,
    sweep_alpha,
    sweep_dlambda,
)
from sim_errors import ConfigurationError
from validate_config import validate_run_config
from wavefield import FieldDumpWriter, FluidParams, GridSettings, build_grid, cached_dtn, check_stability

logger = get_logger("orchestrator")

PROJECT_ROOT = Path(__file__).parent.parent
PROFILES_DIR = PROJECT_ROOT / "configs" / "profiles"
DEFAULT_PROFILE = "paper"
LOCK_NAME = ".experiment.lock"
STALE_LOCK_SECONDS = 3600


def get_tool_version() -> str:
    """Version string from pyproject.toml."""
    pyproject_path = PROJECT_ROOT / "pyproject.toml"
    try:
        content = pyproject_path.read_text(encoding="utf-8")
        match = re.search(r'version\s*=\s*["\']([^"\']+)["\']', content)
        if match:
            return match.group(1)
    except OSError:
        pass
    return "0.0.0"


def deep_merge(base: Dict, override: Dict) -> Dict:
    """Recursively merge override into a copy of base; override wins."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_profile(name: str) -> Dict:
    """Load a named defaults profile from configs/profiles/."""
    profile_file = PROFILES_DIR / f"{name}.json"
    if not profile_file.exists():
        available = sorted(p.stem for p in PROFILES_DIR.glob("*.json"))
        raise ConfigurationError("profile", f"unknown profile '{name}' (available: {', '.join(available)})")
    with open(profile_file, "r", encoding="utf-8") as f:
        data = json.load(f)
    return {k: v for k, v in data.items() if not k.startswith("_")}


def load_config(config_path, profile: str = DEFAULT_PROFILE, validate: bool = True) -> Dict:
    """Load a run configuration, validate the raw file, then merge it over the profile."""
    config_file = Path(config_path)

    logger.info(f"Loading configuration from {config_file} (profile: {profile})")

    if not config_file.exists():
        logger.error(f"Config file not found: {config_path}")
        raise FileNotFoundError(f"Config file not found: {config_path}")

    try:
        with open(config_file, "r", encoding="utf-8") as f:
            run_config = json.load(f)
        logger.debug(f"Successfully parsed JSON from {config_file}")
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {config_path}: {e}")
        raise ValueError(
            f"Invalid JSON in config file '{config_path}':\n"
            f"  Error: {e.msg}\n"
            f"  Line {e.lineno}, column {e.colno}\n"
            f"  Fix the JSON syntax and try again."
        )
    except UnicodeDecodeError as e:
        logger.error(f"Encoding error in {config_path}: {e}")
        raise ValueError(
            f"❌ [bold red]Encoding Error[/bold red]\n\n"
            f"Config file '[yellow]{config_path}[/yellow]' is not valid UTF-8 text.\n\n"
            f"[dim]Error details:[/dim] {e}\n\n"
            f"[bold]Solution:[/bold]\n"
            f"  • Save the file with UTF-8 encoding\n"
            f"  • Ensure no binary data was pasted into it"
        )

    if validate:
        is_valid, errors = validate_run_config(config_file, strict=False)
        if not is_valid:
            error_msg = "\n".join(f"  - {e}" for e in errors)
            logger.error(f"Schema validation failed: {config_path}")
            raise ValueError(f"Schema validation failed:\n{error_msg}")

    user_config = {k: v for k, v in run_config.items() if not k.startswith("_")}
    merged = deep_merge(load_profile(profile), user_config)
    merged["profile"] = profile
    return merged


def config_hash(config: Dict) -> str:
    """First 16 hex digits of sha256 over the canonical JSON form."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def apply_overrides(config: Dict, seed: Optional[int] = None, out_dir: Optional[Path] = None) -> Dict:
    """CLI overrides: --seed and --out. Worker count never enters the config."""
    config = copy.deepcopy(config)
    if seed is not None:
        config.setdefault("experiment", {})["master_seed"] = int(seed)
    if out_dir is not None:
        config.setdefault("output", {})["dir"] = str(out_dir)
    return config


def _block(config: Dict, name: str) -> Dict:
    block = config.get(name, {})
    if not isinstance(block, dict):
        raise ConfigurationError(name, "must be an object")
    return block


def fluid_from_config(config: Dict) -> FluidParams:
    return FluidParams(**_block(config, "fluid"))


def layout_from_config(config: Dict) -> LayoutConfig:
    return LayoutConfig(**_block(config, "geometry"))


def droplet_from_config(config: Dict, fluid: FluidParams) -> DropletParams:
    values = dict(_block(config, "droplet"))
    if "mass" not in values:
        values["mass"] = mass_from_radius(values.get("radius", DropletParams.radius), fluid.rho)
    return DropletParams(**values)


def grid_settings_from_config(config: Dict) -> GridSettings:
    return GridSettings(**_block(config, "grid"))


def physics_from_config(config: Dict) -> PhysicsConfig:
    fluid = fluid_from_config(config)
    return PhysicsConfig(
        fluid=fluid,
        layout=layout_from_config(config),
        droplet=droplet_from_config(config, fluid),
        grid=grid_settings_from_config(config),
    )


def convergence_from_config(config: Dict) -> ConvergenceRule:
    rule = ConvergenceRule(**_block(config, "experiment").get("convergence", {}))
    rule.validate()
    return rule


def dynamics_from_config(config: Dict):
    """Stub outcome generator named in experiment.dynamics, or None for the physics run."""
    spec = dict(_block(config, "experiment").get("dynamics", {"type": "physics"}))
    kind = spec.pop("type", "physics")
    stubs = {
        "physics": None,
        "constant": ConstantStub,
        "correlated": CorrelatedStub,
        "probability": ProbabilityStub,
        "singlet": SingletStub,
    }
    if kind not in stubs:
        raise ConfigurationError("experiment.dynamics.type", f"unknown dynamics '{kind}'")
    if stubs[kind] is None:
        return None
    try:
        return stubs[kind](**spec)
    except TypeError as e:
        raise ConfigurationError("experiment.dynamics", str(e)) from None


def bell_settings_from_config(config: Dict) -> BellSettings:
    return BellSettings(**_block(config, "experiment").get("settings", {}))


def base_spec_from_config(config: Dict) -> RunSpec:
    """RunSpec for the experiment block; sweeps replace the swept fields."""
    experiment = _block(config, "experiment")
    physics = physics_from_config(config)
    fraction = float(experiment.get("delta_lambda_fraction", 1.0))
    if not (0.0 <= fraction <= 1.0):
        raise ConfigurationError("experiment.delta_lambda_fraction", f"must lie in [0, 1], got {fraction}")
    spec = RunSpec(
        master_seed=int(experiment.get("master_seed", 0)),
        delta_lambda=fraction * physics.layout.cavity_length,
        t_m=int(experiment.get("t_m", 400)),
        alpha=float(experiment.get("alpha", 0.099)),
        beta=float(experiment.get("beta", experiment.get("alpha", 0.099))),
        sampling_mode=experiment.get("mode", "independent"),
        convergence=convergence_from_config(config),
        physics=physics,
        asymmetry_epsilon=float(experiment.get("asymmetry_epsilon", 0.0)),
        dynamics=dynamics_from_config(config),
    )
    spec.validate()
    if spec.dynamics is None:
        spec.topography()
    return spec


def calibration_from_config(config: Dict) -> CalibrationSettings:
    values = dict(_block(config, "calibration"))
    if "check_grid" in values:
        values["check_grid"] = GridSettings(**values["check_grid"])
    for key in ("dispersion_modes", "bracket"):
        if key in values:
            values[key] = tuple(values[key])
    settings = CalibrationSettings(**values)
    settings.validate()
    return settings


def validate_experiment(config: Dict) -> RunSpec:
    """Semantic checks of a merged config before any simulation starts."""
    spec = base_spec_from_config(config)
    experiment = _block(config, "experiment")
    for fraction in experiment.get("delta_lambda_fractions", []):
        if not (0.0 <= float(fraction) <= 1.0):
            raise ConfigurationError("experiment.delta_lambda_fractions", f"{fraction} is outside [0, 1]")
    if spec.dynamics is None:
        layout = spec.physics.layout
        bell_settings_from_config(config).validate(layout.cavity_depth)
        for alpha in experiment.get("alpha_grid", []):
            if not (0.0 < float(alpha) < layout.cavity_depth):
                raise ConfigurationError("experiment.alpha_grid", f"{alpha} cm is not a valid barrier depth")
    return spec


def alpha_sweep_spec(config: Dict) -> Tuple[RunSpec, List[float]]:
    """Base spec and detector-depth grid of sweep-alpha, with its own T_m and initial interval."""
    spec = validate_experiment(config)
    experiment = _block(config, "experiment")
    fraction = float(experiment.get("alpha_delta_lambda_fraction", 1.0))
    if not (0.0 <= fraction <= 1.0):
        raise ConfigurationError("experiment.alpha_delta_lambda_fraction", f"must lie in [0, 1], got {fraction}")
    spec = replace(
        spec,
        t_m=int(experiment.get("alpha_t_m", 1200)),
        delta_lambda=fraction * spec.physics.layout.cavity_length,
    )
    spec.validate()
    alpha_grid = [float(a) for a in experiment.get("alpha_grid", [spec.alpha])]
    return spec, alpha_grid


def preflight(spec: RunSpec) -> None:
    """Build the operator for the base topography and run the stability validator."""
    if spec.dynamics is not None:
        return
    physics = spec.physics
    topo = spec.topography()
    grid = build_grid(topo, physics.grid, physics.fluid)
    started = time.perf_counter()
    dtn = cached_dtn(topo, grid, physics.grid.smoothing_cells)
    report = check_stability(dtn, physics.fluid)
    logger.info(
        f"Preflight nx={grid.nx} nz={grid.nz} dt={grid.dt:.3e} stability index={report.index:.3f} "
        f"({time.perf_counter() - started:.1f}s)"
    )


def validate_path_safety(path_str: str, base_dir: Optional[str] = None) -> Path:
    """
    Ensure path is safe and within expected directory.

    Args:
        path_str: Path string to validate
        base_dir: Optional base directory to ensure path is within

    Returns:
        Resolved absolute Path

    Raises:
        ConfigurationError: If path is unsafe (contains traversal or outside base_dir)
    """
    path = Path(path_str)
    abs_path = path.resolve()

    if ".." in path.parts:
        raise ConfigurationError("output.dir", f"Path traversal not allowed: {path_str}")

    if base_dir:
        base_abs = Path(base_dir).resolve()
        try:
            abs_path.relative_to(base_abs)
        except ValueError:
            raise ConfigurationError("output.dir", f"Path {path_str} is outside allowed directory {base_dir}")

    return abs_path


def acquire_output_lock(out_dir: Path) -> Path:
    """Prevent two experiments writing into one output directory (atomic)."""
    lock_file = Path(out_dir) / LOCK_NAME
    lock_file.parent.mkdir(parents=True, exist_ok=True)

    try:
        with open(lock_file, "x") as f:
            f.write(f"PID: {os.getpid()}\nTime: {datetime.now().isoformat()}\n")
        logger.debug(f"Acquired output lock: {lock_file}")
        return lock_file
    except FileExistsError:
        lock_age = time.time() - lock_file.stat().st_mtime
        if lock_age > STALE_LOCK_SECONDS:
            logger.warning(f"Found stale lock file (age: {lock_age/60:.1f} minutes), attempting removal")
            try:
                lock_file.unlink()
                with open(lock_file, "x") as f:
                    f.write(f"PID: {os.getpid()}\nTime: {datetime.now().isoformat()}\n")
                logger.info(f"Removed stale lock and acquired new lock: {lock_file}")
                return lock_file
            except (FileExistsError, FileNotFoundError):
                pass

        raise RuntimeError(
            f"Experiment already in progress in {out_dir}.\n"
            f"  Lock file: {lock_file}\n"
            f"  If no experiment is running, delete the lock file manually."
        )


def release_output_lock(lock_file: Optional[Path]) -> None:
    if lock_file and lock_file.exists():
        lock_file.unlink()
        logger.debug(f"Released output lock: {lock_file}")


@contextmanager
def output_session(config: Dict):
    """Resolve and lock the output directory for the duration of a workflow."""
    out_dir = Path(_block(config, "output").get("dir", "runtime/output"))
    out_dir.mkdir(parents=True, exist_ok=True)
    out_dir = validate_path_safety(str(out_dir))
    lock = acquire_output_lock(out_dir)
    try:
        yield out_dir
    finally:
        release_output_lock(lock)


def output_path(out_dir: Path, name: str) -> Path:
    return validate_path_safety(str(Path(out_dir) / name), str(out_dir))


@dataclass
class WorkflowResult:
    command: str
    config_hash: str
    tool_version: str
    outputs: List[Path] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    table: Optional[SweepTable] = None
    chsh: Optional[ChshExperiment] = None
    calibration: Optional[CalibrationReport] = None
    measurement: Optional[Dict] = None


def _start(command: str, config: Dict) -> WorkflowResult:
    return WorkflowResult(command=command, config_hash=config_hash(config), tool_version=get_tool_version())


def _open_ledger(out_dir: Path, name: str, config: Dict, result: WorkflowResult, resume: bool) -> RunLedger:
    ledger = RunLedger(output_path(out_dir, name), resume=resume)
    ledger.write_header(config, result.config_hash, result.tool_version, result.command)
    result.outputs.append(ledger.path)
    return ledger


def run_single(config: Dict, progress: Optional[Callable[[int, int], None]] = None) -> WorkflowResult:
    """One coupled simulation: trajectory CSV, optional field dump, measurement record."""
    spec = validate_experiment(config)
    if spec.dynamics is not None:
        raise ConfigurationError("experiment.dynamics", "the run command needs the physics dynamics")
    output = _block(config, "output")
    run_index = int(output.get("run_index", 0))
    record_every = int(output.get("trajectory_every", 16))
    result = _start("run", config)
    preflight(spec)

    with output_session(config) as out_dir:
        writer = None
        if output.get("field_dump", False):
            grid = build_grid(spec.topography(), spec.physics.grid, spec.physics.fluid)
            writer = FieldDumpWriter(
                output_path(out_dir, "field_dump.bin"), grid.nx, grid.dx, grid.dt,
                config_hash=result.config_hash, tool_version=result.tool_version,
            )
        try:
            sim = simulate(
                spec, run_index, record_every=record_every, field_dump=writer,
                dump_every=int(output.get("dump_every", 16)), progress=progress,
            )
        finally:
            if writer is not None:
                writer.close()
                result.outputs.append(writer.path)

        trajectory_path = output_path(out_dir, "trajectory.csv")
        result.outputs.append(
            write_trajectory_csv(trajectory_path, sim.trajectory, result.config_hash, result.tool_version)
        )
        measurement = {
            "run_index": run_index,
            "seed": derive_seed(spec.master_seed, run_index),
            "X_A": sim.outcome_a,
            "X_B": sim.outcome_b,
            "x_A": sim.droplet_a.x,
            "x_B": sim.droplet_b.x,
            "t_m": spec.t_m,
            "tunneling_A": [{"t": e.t, "direction": e.direction} for e in sim.events_a],
            "tunneling_B": [{"t": e.t, "direction": e.direction} for e in sim.events_b],
            "diagnostics": sim.diagnostics(),
            "config": config,
            "config_hash": result.config_hash,
            "tool_version": result.tool_version,
        }
        result.outputs.append(write_json_atomic(output_path(out_dir, "measurement.json"), measurement))
        result.measurement = measurement
    return result


def _collect_warnings(table: SweepTable, result: WorkflowResult) -> None:
    for row in table.rows:
        if not row.converged:
            result.warnings.append(f"{table.variable}={row.sweep_var} T_m={row.t_m}: not converged")
        if row.n_failed:
            result.warnings.append(f"{table.variable}={row.sweep_var} T_m={row.t_m}: {row.n_failed} failed run(s)")


def run_sweep_dlambda(config: Dict, workers: int = 1, resume: bool = False, on_row=None) -> WorkflowResult:
    spec = validate_experiment(config)
    experiment = _block(config, "experiment")
    fractions = experiment.get("delta_lambda_fractions", [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    t_m_list = experiment.get("t_m_list", [spec.t_m])
    grid_cm = [float(f) * spec.physics.layout.cavity_length for f in fractions]
    result = _start("sweep-dlambda", config)
    preflight(spec)

    with output_session(config) as out_dir:
        ledger = _open_ledger(out_dir, "sweep_dlambda.jsonl", config, result, resume)
        with RunExecutor(workers) as executor:
            table = sweep_dlambda(spec, grid_cm, t_m_list, executor, ledger, on_row)
        result.outputs.append(
            write_sweep_csv(output_path(out_dir, "sweep_dlambda.csv"), table, result.config_hash, result.tool_version)
        )
    result.table = table
    _collect_warnings(table, result)
    return result


def run_sweep_alpha(config: Dict, workers: int = 1, resume: bool = False, on_row=None) -> WorkflowResult:
    spec, alpha_grid = alpha_sweep_spec(config)
    result = _start("sweep-alpha", config)
    preflight(spec)

    with output_session(config) as out_dir:
        ledger = _open_ledger(out_dir, "sweep_alpha.jsonl", config, result, resume)
        with RunExecutor(workers) as executor:
            table = sweep_alpha(spec, alpha_grid, executor, ledger, on_row)
        result.outputs.append(
            write_sweep_csv(output_path(out_dir, "sweep_alpha.csv"), table, result.config_hash, result.tool_version)
        )
    result.table = table
    _collect_warnings(table, result)
    return result


def run_chsh(config: Dict, workers: int = 1, resume: bool = False, on_term=None) -> WorkflowResult:
    spec = validate_experiment(config)
    settings = bell_settings_from_config(config)
    result = _start("chsh", config)
    preflight(spec)

    with output_session(config) as out_dir:
        ledger = _open_ledger(out_dir, "chsh.jsonl", config, result, resume)
        with RunExecutor(workers) as executor:
            experiment = chsh_experiment(settings, spec, executor, ledger, on_term)
        result.outputs.append(
            write_chsh_csv(output_path(out_dir, "chsh.csv"), experiment, result.config_hash, result.tool_version)
        )
    result.chsh = experiment
    result.warnings.extend(experiment.result.notes)
    return result


def run_calibration(config: Dict) -> WorkflowResult:
    spec = validate_experiment(config)
    settings = calibration_from_config(config)
    result = _start("calibrate", config)
    physics = spec.physics

    with output_session(config) as out_dir:
        report = calibration_report(spec.topography(), physics.fluid, physics.grid, settings)
        payload = {**report.as_dict(), "config_hash": result.config_hash, "tool_version": result.tool_version}
        result.outputs.append(write_json_atomic(output_path(out_dir, "calibration.json"), payload))
    result.calibration = report
    result.warnings.extend(f"{i.name}: {i.value:.4g} vs {i.target:.4g}" for i in report.items if i.status == "warn")
    return result


def summarize(config: Dict) -> List[Tuple[str, str]]:
    """Flattened (setting, value) pairs of a merged config for display."""
    rows = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for key in sorted(value):
                walk(f"{prefix}.{key}" if prefix else key, value[key])
        else:
            rows.append((prefix, json.dumps(value) if isinstance(value, (list, bool)) or value is None else str(value)))

    walk("", config)
    return rows
