#!/usr/bin/env python3
"""
Rich utilities for consistent terminal output across all commands.

Provides standardized styling, panels, progress indicators, and result tables.
"""

import math
from typing import Iterable, List, Optional, Sequence, Tuple

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

# Global console instance with forced colors
console = Console(force_terminal=True, color_system="truecolor")


def print_success(message: str):
    """Print a success message."""
    console.print(f"[bold green on black]✓[/bold green on black] [bold green]{message}[/bold green]")


def print_error(message: str):
    """Print an error message."""
    console.print(f"[bold red on black]✗[/bold red on black] [bold red]{message}[/bold red]")


def print_warning(message: str):
    console.print(f"[bold yellow on black]⚠[/bold yellow on black] [bold yellow]{message}[/bold yellow]")


def print_info(message: str):
    console.print(f"[bold cyan on black]ℹ[/bold cyan on black] [bold cyan]{message}[/bold cyan]")


def _panel(content: str, border_style: str) -> None:
    console.print()
    console.print(Panel(content, border_style=border_style, box=box.DOUBLE, padding=(1, 2)))
    console.print()


def error_panel(title: str, details: str = "", solutions: Sequence[str] = (), heading: str = "Solution"):
    """
    Print the standard error panel.

    The layout is a title line, an optional details block and a bullet list of
    solution hints.
    """
    content = f"[bold red on black]❌[/bold red on black] [bold red]{title}[/bold red]"
    if details:
        content += f"\n\n[white]{details}[/white]"
    if solutions:
        content += f"\n\n[bold cyan]{heading}:[/bold cyan]\n" + "\n".join(f"  • {s}" for s in solutions)
    _panel(content, "red")


def success_panel(title: str, details: str = ""):
    content = f"[bold green on black]✓[/bold green on black] [bold green]{title}[/bold green]"
    if details:
        content += f"\n\n[dim]{details}[/dim]"
    _panel(content, "green")


def title_panel(title: str, subtitle: str = ""):
    content = f"[bold bright_cyan]{title}[/bold bright_cyan]"
    if subtitle:
        content += f"\n\n{subtitle}"
    _panel(content, "cyan")


def create_table(title: str, columns: list, rows: list = None):
    """Create a styled table."""
    table = Table(title=title, box=box.SIMPLE, show_header=True, header_style="bold magenta")

    for col in columns:
        table.add_column(col)

    if rows:
        for row in rows:
            table.add_row(*row)

    return table


def print_table(title: str, columns: list, rows: list = None):
    console.print(create_table(title, columns, rows))


def create_progress():
    """Create a progress bar context manager."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeElapsedColumn(),
        console=console,
    )


def print_config_table(rows: Iterable[Tuple[str, str]], title: str = "Configuration"):
    """Print (setting, value) pairs as a Rich table."""
    table = Table(
        title=f"[bold cyan]{title}[/bold cyan]",
        box=box.ROUNDED,
        show_header=True,
        header_style="bold cyan",
        border_style="cyan",
        padding=(0, 1),
    )
    table.add_column("Setting", style="bold white", no_wrap=True)
    table.add_column("Value", style="cyan")
    for key, value in rows:
        if value == "true":
            value = "[bold green]✓ Enabled[/bold green]"
        elif value == "false":
            value = "[dim]Disabled[/dim]"
        table.add_row(key, value)
    console.print(table)


def _fmt(value, digits: int = 4) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "[dim]n/a[/dim]"
        return f"{value:.{digits}f}"
    return str(value)


def _flag(converged: bool) -> str:
    return "[bold green]✓[/bold green]" if converged else "[bold yellow]⚠ unconverged[/bold yellow]"


def print_sweep_table(table, title: Optional[str] = None):
    """Print a SweepTable with one line per cell."""
    rows = [
        [
            _fmt(r.sweep_var), str(r.t_m), _fmt(r.m_hat), _fmt(r.std_error),
            str(r.n_samples), str(r.n_failed), r.stop_reason, _flag(r.converged),
        ]
        for r in table.rows
    ]
    print_table(
        title or f"Sweep over {table.variable}",
        [table.variable, "T_m", "M", "std err", "N", "failed", "stop", "status"],
        rows,
    )


def print_chsh_result(experiment):
    rows = []
    for label, alpha, beta in experiment.settings.pairs():
        est = experiment.estimates[label]
        rows.append(
            [f"M({label})", _fmt(alpha), _fmt(beta), _fmt(est.m_hat), _fmt(est.std_error), str(est.n_samples),
             _flag(est.converged)]
        )
    result = experiment.result
    rows.append(["[bold]S[/bold]", "", "", f"[bold]{result.s_value:.4f}[/bold]", _fmt(result.s_error), "", ""])
    print_table("CHSH combination", ["term", "alpha", "beta", "value", "std err", "N", "status"], rows)

    verdict = experiment.verdict.verdict
    style = {"violated": "bold magenta", "satisfied": "bold green"}.get(verdict, "bold yellow")
    console.print(f"Verdict: [{style}]{verdict}[/{style}] (|S| - 2 = {experiment.verdict.margin:+.4f})")


def print_exact_chsh(result, title: str = "Exact CHSH"):
    rows = [[f"M{i + 1}", f"{c.m_hat:+.10f}"] for i, c in enumerate(result.components)]
    rows.append(["[bold]S[/bold]", f"[bold]{result.s_value:+.10f}[/bold]"])
    print_table(title, ["term", "value"], rows)


def print_calibration_report(report):
    styles = {"pass": "[bold green]pass[/bold green]", "warn": "[bold yellow]warn[/bold yellow]",
              "fail": "[bold red]fail[/bold red]"}
    rows = [
        [item.name, f"{item.value:.5g}", f"{item.target:.5g}", f"{100 * item.rel_error:.2f}%",
         f"{100 * item.tolerance:.0f}%", styles.get(item.status, item.status), item.detail]
        for item in report.items
    ]
    print_table("Calibration", ["check", "value", "target", "error", "tolerance", "status", "unit"], rows)


def print_file_list(files: List, title: str = "Files"):
    """Print a formatted list of files."""
    if not files:
        console.print(f"[dim]No {title.lower()} found.[/dim]")
        return

    table = Table(title=title, box=box.SIMPLE, show_header=False)
    table.add_column("File", style="cyan")

    for file in files:
        table.add_row(str(file))

    console.print(table)
