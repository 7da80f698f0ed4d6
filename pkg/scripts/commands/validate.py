"""
Validate command - Validate run configurations and probability tables.
"""

import json
import sys
from pathlib import Path

import typer
from rich import box
from rich.panel import Panel
from rich.table import Table

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent.parent
if str(scripts_dir) not in sys.path:
    sys.path.insert(0, str(scripts_dir))

from commands.common import EXIT_CONFIG, EXIT_OK, ProfileOption
from orchestrator import load_config, validate_experiment
from rich_utils import console, error_panel, success_panel
from sim_errors import ConfigurationError
from validate_config import validate_config_file

KINDS = ("run", "table")


def _row(table: Table, check: str, ok: bool, detail: str) -> None:
    mark = "[bold bright_green]✓[/bold bright_green]" if ok else "[bold bright_red]✗[/bold bright_red]"
    style = "bright_green" if ok else "bright_red"
    table.add_row(f"[bright_cyan]{check}[/bright_cyan]", mark, f"[{style}]{detail}[/{style}]")


def validate(
    config_path: Path = typer.Option(..., "--config", "-c", help="Path to the file to validate"),
    kind: str = typer.Option("run", "--kind", "-k", help="File kind: run (configuration) or table (probability table)"),
    profile: str = ProfileOption,
):
    """
    Validate a configuration file or probability table.

    Checks JSON syntax, schema compliance and, for run configurations, the
    semantic constraints of the merged experiment (barrier depths, sampling
    interval, convergence rule).

    Example:
        hydrobell validate --config configs/example_run.json
        hydrobell validate --config tables/kernel.json --kind table
    """
    if kind not in KINDS:
        error_panel("Unknown File Kind", f"--kind {kind}", [f"Use one of: {', '.join(KINDS)}"])
        raise typer.Exit(EXIT_CONFIG)
    if not config_path.exists():
        error_panel(
            "Config File Not Found",
            f"Path: [yellow]{config_path}[/yellow]",
            ["Verify the file path is correct", "Check that the file exists in the specified location"],
        )
        raise typer.Exit(EXIT_CONFIG)

    table = Table(
        title="[bold bright_cyan]🔍 Validation Results[/bold bright_cyan]",
        box=box.ROUNDED,
        show_header=True,
        header_style="bold bright_cyan",
        border_style="bright_cyan",
    )
    table.add_column("Check", style="bold bright_cyan", no_wrap=True)
    table.add_column("Status", style="bold", justify="center")
    table.add_column("Details", style="bright_white")
    _row(table, "📄 File exists", True, str(config_path))

    errors = []
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            json.load(f)
        _row(table, "📋 JSON syntax", True, "Valid JSON")
    except UnicodeDecodeError as e:
        _row(table, "📋 JSON syntax", False, "Cannot parse (encoding error)")
        errors.append(f"File encoding error: {e}. Save file as UTF-8 encoding.")
    except json.JSONDecodeError as e:
        _row(table, "📋 JSON syntax", False, f"Invalid JSON: {e}")
        errors.append(f"Invalid JSON: {e}")

    if not errors:
        is_valid, errors = validate_config_file(config_path, kind)
        _row(table, "✅ Schema validation", is_valid, "Passed" if is_valid else f"{len(errors)} error(s)")

    if not errors and kind == "run":
        try:
            validate_experiment(load_config(str(config_path), profile=profile, validate=False))
            _row(table, "⚙️  Experiment", True, f"Consistent with profile {profile}")
        except (ConfigurationError, ValueError) as e:
            _row(table, "⚙️  Experiment", False, "Semantic check failed")
            errors.append(str(e))

    console.print()
    console.print(table)
    console.print()

    if errors:
        error_text = "\n".join(f"  [bright_red]•[/bright_red] [bright_white]{error}[/bright_white]" for error in errors)
        console.print(
            Panel(
                error_text,
                title="[bold bright_red]⚠️  Validation Errors[/bold bright_red]",
                border_style="bright_red",
                box=box.DOUBLE,
                padding=(1, 2),
            )
        )
        raise typer.Exit(EXIT_CONFIG)

    success_panel("Configuration is valid!")
    raise typer.Exit(EXIT_OK)
