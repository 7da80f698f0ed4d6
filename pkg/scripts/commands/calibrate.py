"""
Calibrate command - Check the bath model against dispersion, decay and Faraday references.
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
    EXIT_RUNTIME,
    ConfigOption,
    DebugOption,
    OutOption,
    ProfileOption,
    command_errors,
    logging_session,
    prepare,
)
from orchestrator import run_calibration
from rich_utils import error_panel, print_calibration_report, print_file_list, print_warning, success_panel, title_panel


def calibrate(
    config_path: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    profile: str = ProfileOption,
    no_threshold: bool = typer.Option(False, "--no-threshold", help="Skip the Faraday threshold bisection"),
    no_subharmonic: bool = typer.Option(False, "--no-subharmonic", help="Skip the simulated Faraday pattern"),
    debug: bool = DebugOption,
):
    """
    Run the calibration report.

    Dispersion and decay checks fail outright; Faraday wavelength and threshold
    comparisons against the reference experiment only warn.

    Example:
        hydrobell calibrate --config configs/example_run.json --profile desk
    """
    config = prepare(config_path, profile, out=out, debug=debug)
    block = config.setdefault("calibration", {})
    if no_threshold:
        block["threshold"] = False
    if no_subharmonic:
        block["subharmonic"] = False
    title_panel("🧪 Calibration", f"[white]Config:[/white] [bold cyan]{config_path}[/bold cyan]")

    with logging_session(), command_errors(debug):
        result = run_calibration(config)

    print_calibration_report(result.calibration)
    print_file_list(result.outputs, "Outputs")
    for warning in result.warnings:
        print_warning(warning)
    if result.calibration.failed:
        error_panel(
            "Calibration Failed",
            "At least one dispersion or decay check is out of tolerance.",
            ["Refine the check grid (calibration.check_grid)", "Increase grid.steps_per_period"],
        )
        raise typer.Exit(EXIT_RUNTIME)
    success_panel("Calibration Complete", f"{len(result.warnings)} warning(s)")
    raise typer.Exit(EXIT_OK)
