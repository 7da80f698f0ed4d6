"""
Run command - Simulate a single coupled trajectory.
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
    SeedOption,
    command_errors,
    logging_session,
    prepare,
)
from orchestrator import run_single
from rich_utils import console, create_progress, print_file_list, print_table, success_panel, title_panel


def run(
    config_path: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = SeedOption,
    profile: str = ProfileOption,
    run_index: int = typer.Option(0, "--run-index", min=0, help="Run index (selects the derived seed)"),
    debug: bool = DebugOption,
):
    """
    Simulate one run and write its trajectory and measurement.

    Outputs trajectory.csv, measurement.json and, when output.field_dump is
    enabled, field_dump.bin.

    Example:
        hydrobell run --config configs/example_run.json --profile desk
    """
    config = prepare(config_path, profile, seed=seed, out=out, debug=debug)
    config.setdefault("output", {})["run_index"] = run_index
    title_panel("🌊 Single Run", f"[white]Config:[/white] [bold cyan]{config_path}[/bold cyan]  [dim]profile {profile}[/dim]")

    with logging_session(), command_errors(debug):
        with create_progress() as progress:
            task = progress.add_task("Integrating", total=None)

            def advance(done, total):
                progress.update(task, completed=done, total=total)

            result = run_single(config, progress=advance)

    m = result.measurement
    print_table(
        "Measurement",
        ["side", "outcome", "final x (cm)", "tunneling events"],
        [
            ["A", f"{m['X_A']:+d}", f"{m['x_A']:.4f}", str(len(m["tunneling_A"]))],
            ["B", f"{m['X_B']:+d}", f"{m['x_B']:.4f}", str(len(m["tunneling_B"]))],
        ],
    )
    console.print(f"[dim]max mirror deviation:[/dim] {m['diagnostics']['max_mirror_deviation']:.3e} cm")
    print_file_list(result.outputs, "Outputs")
    success_panel("Run Complete", f"config hash {result.config_hash}")
    raise typer.Exit(EXIT_OK)
