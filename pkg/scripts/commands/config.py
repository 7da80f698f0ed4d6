"""
Config command - Inspect resolved configurations and defaults profiles.
"""

import json
import sys
from pathlib import Path

import typer
from rich.json import JSON

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent.parent
if str(scripts_dir) not in sys.path:
    sys.path.insert(0, str(scripts_dir))

from commands.common import EXIT_OK, ConfigOption, ProfileOption, command_errors
from orchestrator import PROFILES_DIR, config_hash, load_config, summarize
from rich_utils import console, print_config_table, print_info, print_table

app = typer.Typer(name="config", help="Inspect configurations and profiles")


@app.command()
def show(
    config_path: Path = ConfigOption,
    profile: str = ProfileOption,
    raw: bool = typer.Option(False, "--json", help="Print the merged config as JSON"),
):
    """
    Display a configuration merged over its defaults profile.

    Example:
        hydrobell config show --config configs/example_run.json --profile desk
    """
    with command_errors():
        config = load_config(str(config_path), profile=profile)
    console.print()
    if raw:
        console.print(JSON.from_data(config))
    else:
        print_config_table(summarize(config), title=f"Resolved configuration ({profile})")
    print_info(f"config hash {config_hash(config)}")
    raise typer.Exit(EXIT_OK)


@app.command()
def profiles():
    """
    List the bundled defaults profiles.

    Example:
        hydrobell config profiles
    """
    rows = []
    for path in sorted(PROFILES_DIR.glob("*.json")):
        with command_errors(), open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        rows.append([path.stem, str(data.get("_description", "")), str(data.get("grid", {}).get("points_per_wavelength", ""))])
    print_table("Profiles", ["name", "description", "points per wavelength"], rows)
    raise typer.Exit(EXIT_OK)
