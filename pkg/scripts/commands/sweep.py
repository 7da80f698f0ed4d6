"""
Sweep commands - Monte Carlo estimates of the Bell correlation over parameter grids.
"""

import sys
from pathlib import Path
from typing import Optional

import typer

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent.parent
if str(scripts_dir) not in sys.path:
    sys.path.insert(0, str(scripts_dir))

from commands.common import (
    EXIT_OK,
    ConfigOption,
    DebugOption,
    OutOption,
    ProfileOption,
    ResumeOption,
    SeedOption,
    WorkersOption,
    command_errors,
    logging_session,
    prepare,
)
from orchestrator import run_chsh, run_sweep_alpha, run_sweep_dlambda
from rich_utils import (
    console,
    print_chsh_result,
    print_file_list,
    print_info,
    print_sweep_table,
    print_warning,
    success_panel,
    title_panel,
)


def _finish(result) -> None:
    print_file_list(result.outputs, "Outputs")
    for warning in result.warnings:
        print_warning(warning)
    details = f"config hash {result.config_hash}"
    if result.warnings:
        details += f"\n{len(result.warnings)} warning(s)"
    success_panel("Sweep Complete", details)


def _row_printer(variable: str):
    def on_row(row):
        status = "" if row.converged else " [yellow](unconverged)[/yellow]"
        print_info(f"{variable}={row.sweep_var:.4g} T_m={row.t_m}: M={row.m_hat:.4f} ± {row.std_error:.4f}{status}")

    return on_row


def sweep_dlambda(
    config_path: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    workers: int = WorkersOption,
    seed: Optional[int] = SeedOption,
    profile: str = ProfileOption,
    resume: bool = ResumeOption,
    debug: bool = DebugOption,
):
    """
    Estimate M(alpha, beta) over the delta-lambda grid for every T_m in t_m_list.

    Grid values are experiment.delta_lambda_fractions times the outer cavity length.

    Example:
        hydrobell sweep-dlambda --config configs/example_run.json --workers 4
    """
    config = prepare(config_path, profile, seed=seed, out=out, debug=debug)
    title_panel("📈 Delta-Lambda Sweep", f"[white]Config:[/white] [bold cyan]{config_path}[/bold cyan]")
    with logging_session(), command_errors(debug):
        result = run_sweep_dlambda(config, workers=workers, resume=resume, on_row=_row_printer("dlambda"))
    print_sweep_table(result.table)
    _finish(result)
    raise typer.Exit(EXIT_OK)


def sweep_alpha(
    config_path: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    workers: int = WorkersOption,
    seed: Optional[int] = SeedOption,
    profile: str = ProfileOption,
    resume: bool = ResumeOption,
    debug: bool = DebugOption,
):
    """
    Estimate M(alpha, alpha) for every barrier depth in experiment.alpha_grid.

    Example:
        hydrobell sweep-alpha --config configs/example_run.json
    """
    config = prepare(config_path, profile, seed=seed, out=out, debug=debug)
    title_panel("📈 Barrier Depth Sweep", f"[white]Config:[/white] [bold cyan]{config_path}[/bold cyan]")
    with logging_session(), command_errors(debug):
        result = run_sweep_alpha(config, workers=workers, resume=resume, on_row=_row_printer("alpha"))
    print_sweep_table(result.table)
    _finish(result)
    raise typer.Exit(EXIT_OK)


def chsh(
    config_path: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    workers: int = WorkersOption,
    seed: Optional[int] = SeedOption,
    profile: str = ProfileOption,
    resume: bool = ResumeOption,
    debug: bool = DebugOption,
):
    """
    Estimate the four correlations of the CHSH combination and report the bound verdict.

    Settings come from experiment.settings (a, a_prime, b, b_prime).

    Example:
        hydrobell chsh --config configs/example_run.json --workers 8
    """
    config = prepare(config_path, profile, seed=seed, out=out, debug=debug)
    title_panel("🔔 CHSH Experiment", f"[white]Config:[/white] [bold cyan]{config_path}[/bold cyan]")

    def on_term(label, est):
        print_info(f"M({label}) = {est.m_hat:.4f} ± {est.std_error:.4f} from {est.n_samples} runs")

    with logging_session(), command_errors(debug):
        result = run_chsh(config, workers=workers, resume=resume, on_term=on_term)
    console.print()
    print_chsh_result(result.chsh)
    _finish(result)
    raise typer.Exit(EXIT_OK)
