"""Rich console output for dual-hormone-ap."""

from __future__ import annotations

import logging

import pandas as pd
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table

# Global console instance for consistent output
console = Console()

_TASK_DESCRIPTION_FORMAT = "[bold blue]{task.description}"

# Summary columns shown by the report table, with their headers.
REPORT_COLUMNS = {
    "pct_severe_hypo": "<3.0",
    "pct_hypo": "3.0-3.9",
    "pct_normo": "TIR",
    "pct_hyper": "10-13.9",
    "pct_severe_hyper": ">13.9",
    "mean_glucose_mmolL": "mean G",
    "basal_U_per_day": "basal U/d",
    "bolus_U_per_day": "bolus U/d",
    "glucagon_ug_per_day": "glucagon µg/d",
}


def setup_logging(verbose: bool = False) -> None:
    """Route library logging through rich; DEBUG when ``verbose``, else WARNING."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


def create_batch_progress() -> Progress:
    """Create Rich progress display for cohort runs.

    Returns:
        Configured Progress instance counting finished patients.
    """
    return Progress(
        SpinnerColumn(),
        TextColumn(_TASK_DESCRIPTION_FORMAT),
        BarColumn(),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=False,
    )


def summary_table(frame: pd.DataFrame, title: str = "Glycemic outcome") -> Table:
    """Build a table of a cohort summary frame, one row per patient plus the mean."""
    table = Table(title=title)
    table.add_column("patient", style="bold")
    columns = [c for c in REPORT_COLUMNS if c in frame.columns]
    for column in columns:
        table.add_column(REPORT_COLUMNS[column], justify="right")

    for _, row in frame.iterrows():
        style = "bold" if row["patient"] == "mean" else None
        table.add_row(str(row["patient"]), *(f"{row[c]:.1f}" for c in columns), style=style)
    return table


def print_success(message: str) -> None:
    """Print a success message.

    Args:
        message: The message to print.
    """
    console.print(f"[green]✓[/green] {message}")


def print_error(message: str) -> None:
    """Print an error message.

    Args:
        message: The message to print.
    """
    console.print(f"[red]✗[/red] {message}", style="red")


def print_warning(message: str) -> None:
    """Print a warning message.

    Args:
        message: The message to print.
    """
    console.print(f"[yellow]![/yellow] {message}", style="yellow")


def print_info(message: str) -> None:
    """Print an info message.

    Args:
        message: The message to print.
    """
    console.print(f"[blue]→[/blue] {message}")
