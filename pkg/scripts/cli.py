#!/usr/bin/env python3
"""
Hydrobell - Main Rich CLI

Command-line interface using Typer and Rich for the hydrodynamic Bell-test simulator.
"""

import sys
from pathlib import Path

# Fix Windows console encoding for emoji/unicode
if sys.platform == 'win32':
    try:
        if sys.stdout.encoding != 'utf-8':
            sys.stdout.reconfigure(encoding='utf-8')
        if sys.stderr.encoding != 'utf-8':
            sys.stderr.reconfigure(encoding='utf-8')
    except (AttributeError, ValueError):
        import io
        sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8', errors='replace')
        sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8', errors='replace')

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent
sys.path.insert(0, str(scripts_dir))

from typing import Optional

import typer
from rich import box
from rich.panel import Panel

from orchestrator import get_tool_version
from rich_utils import console

# Create Typer app
app = typer.Typer(
    name="hydrobell",
    help="Hydrobell - Bell tests with bouncing droplets on a vibrated bath",
    add_completion=False,
    rich_markup_mode="rich",
)

# Import and register command modules
from commands import config, hvt
from commands.calibrate import calibrate as calibrate_command
from commands.run import run as run_command
from commands.sweep import chsh as chsh_command
from commands.sweep import sweep_alpha as sweep_alpha_command
from commands.sweep import sweep_dlambda as sweep_dlambda_command
from commands.validate import validate as validate_command

# Register commands with subcommands as typer apps
app.add_typer(config.app, name="config")
app.add_typer(hvt.app, name="hvt")

# Register direct commands
app.command(name="run")(run_command)
app.command(name="sweep-dlambda")(sweep_dlambda_command)
app.command(name="sweep-alpha")(sweep_alpha_command)
app.command(name="chsh")(chsh_command)
app.command(name="calibrate")(calibrate_command)
app.command(name="validate")(validate_command)


def version_callback(value: bool):
    """Show version information."""
    if value:
        version_panel = Panel(
            f"[bold bright_cyan]🌊 [bold bright_magenta]Hydrobell[/bold bright_magenta] "
            f"[bold bright_cyan]Bell-test simulator[/bold bright_cyan][/bold bright_cyan]\n"
            f"[bold bright_magenta]Version:[/bold bright_magenta] [bright_white]{get_tool_version()}[/bright_white]",
            border_style="bright_cyan",
            box=box.DOUBLE,
            padding=(1, 2)
        )
        console.print(version_panel)
        raise typer.Exit()


def main():
    """Main entry point for the CLI."""
    app()


@app.callback()
def callback(
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-v",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit",
    ),
):
    """
    Hydrobell - Bell tests with bouncing droplets on a vibrated bath.

    Simulate paired walkers over coupled cavities, estimate correlations by
    Monte Carlo and evaluate the CHSH combination.
    """
    pass


if __name__ == "__main__":
    app()
