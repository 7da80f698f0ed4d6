"""
Shared command plumbing: option declarations, config loading and error panels.
"""

import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Optional

import typer

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent.parent
if str(scripts_dir) not in sys.path:
    sys.path.insert(0, str(scripts_dir))

from logger_config import setup_logging, shutdown_logging
from orchestrator import DEFAULT_PROFILE, apply_overrides, load_config
from rich_utils import console, error_panel
from sim_errors import (
    CompositionError,
    ConfigurationError,
    ModelViolationError,
    NormalizationError,
    NumericalError,
    SettingLookupError,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

ConfigOption = typer.Option(..., "--config", "-c", help="Path to the run configuration JSON")
OutOption = typer.Option(None, "--out", "-o", help="Output directory (overrides output.dir)")
WorkersOption = typer.Option(1, "--workers", "-w", min=1, help="Parallel worker processes")
SeedOption = typer.Option(None, "--seed", help="Master seed (unsigned 64-bit, overrides config)")
ProfileOption = typer.Option(DEFAULT_PROFILE, "--profile", "-p", help="Defaults profile: paper or desk")
ResumeOption = typer.Option(False, "--resume", help="Reuse completed runs from the ledger")
DebugOption = typer.Option(False, "--debug", help="Enable debug logging and tracebacks")


def prepare(
    config_path: Path,
    profile: str,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    debug: bool = False,
) -> Dict:
    """Load, validate and override the config, then start logging under the output directory."""
    if not config_path.exists():
        error_panel(
            "Config File Not Found",
            f"Path: [yellow]{config_path}[/yellow]",
            [
                "Verify the file path is correct",
                "Start from [cyan]configs/example_run.json[/cyan]",
            ],
        )
        raise typer.Exit(EXIT_CONFIG)
    if seed is not None and not (0 <= seed < 2 ** 64):
        error_panel("Invalid Seed", f"--seed {seed} is not an unsigned 64-bit integer")
        raise typer.Exit(EXIT_CONFIG)

    with command_errors(debug):
        config = apply_overrides(load_config(str(config_path), profile=profile), seed=seed, out_dir=out)
    log_dir = Path(config.get("output", {}).get("dir", "runtime/output")) / "logs"
    setup_logging(log_level="DEBUG" if debug else "INFO", log_dir=log_dir, log_to_file=True, log_to_console=False)
    return config


@contextmanager
def command_errors(debug: bool = False):
    """
    Map failures to error panels and exit codes.

    Configuration and table errors exit 2; numerical and model failures exit 1.
    """
    try:
        yield
    except (typer.Exit, typer.Abort):
        raise
    except ConfigurationError as e:
        error_panel(
            "Configuration Error",
            f"Field: [yellow]{e.field}[/yellow]\n{e.detail}",
            ["Fix the field in your config", "Run [cyan]hydrobell validate --config ...[/cyan] first"],
        )
        raise typer.Exit(EXIT_CONFIG)
    except (NormalizationError, CompositionError, SettingLookupError) as e:
        error_panel(
            "Probability Table Error",
            str(e),
            ["Each conditional slice must sum to 1", "Condition labels must match between tables"],
        )
        raise typer.Exit(EXIT_CONFIG)
    except (ValueError, json.JSONDecodeError, FileNotFoundError) as e:
        message = str(e)
        if "❌" in message:
            console.print(message)
        else:
            error_panel(
                "Configuration Error",
                message,
                [
                    "Validate JSON syntax",
                    "Check field names and types against [cyan]schemas/run_config_schema.json[/cyan]",
                    "Ensure the file is saved as UTF-8",
                ],
                heading="Troubleshooting",
            )
        raise typer.Exit(EXIT_CONFIG)
    except ModelViolationError as e:
        error_panel(
            "Model Violation",
            str(e),
            ["Lower the forcing (fluid.gamma) or droplet speed", "Check the coupling barrier depth"],
        )
        raise typer.Exit(EXIT_RUNTIME)
    except NumericalError as e:
        error_panel(
            "Numerical Failure",
            str(e),
            ["Increase grid.steps_per_period", "Use the paper profile resolution", "Run with --debug for details"],
        )
        raise typer.Exit(EXIT_RUNTIME)
    except Exception as e:
        error_panel(
            "Unexpected Error",
            f"Error: [yellow]{e}[/yellow]",
            ["Run with [cyan]--debug[/cyan] for a detailed traceback"],
            heading="Troubleshooting",
        )
        if debug:
            console.print_exception()
        raise typer.Exit(EXIT_RUNTIME)


@contextmanager
def logging_session():
    try:
        yield
    finally:
        shutdown_logging()
