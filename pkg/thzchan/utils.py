"""Console helpers and output writers for thzchan."""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table


console = Console()
err_console = Console(stderr=True)


def setup_logging(verbosity: int = 0) -> None:
    """Route library logging through rich: WARNING by default, -v INFO, -vv DEBUG."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _fmt(value: Any, digits: int = 3) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.{digits}f}"
    return str(value)


def format_summary_table(summary: dict[str, Any]) -> Table:
    """Format a Monte-Carlo summary as a rich table."""
    table = Table(show_header=True, header_style="bold cyan", title=summary.get("scenario", ""))
    table.add_column("Statistic", style="green")
    table.add_column("Mean", justify="right")
    table.add_column("Std", justify="right")
    table.add_column("Target", justify="right", style="yellow")

    for name, stat in summary.get("statistics", {}).items():
        table.add_row(name, _fmt(stat.get("mean")), _fmt(stat.get("std")), _fmt(stat.get("target", "")))

    return table


def format_ple_table(rows: list[dict[str, Any]]) -> Table:
    """Format fitted path loss exponents per scenario."""
    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("Scenario", style="green")
    table.add_column("PLE best", justify="right")
    table.add_column("σ best (dB)", justify="right")
    table.add_column("PLE omni", justify="right")
    table.add_column("σ omni (dB)", justify="right")

    for row in rows:
        table.add_row(
            row["scenario"],
            _fmt(row["ple_best"], 2),
            _fmt(row["sigma_best_db"], 2),
            _fmt(row["ple_omni"], 2),
            _fmt(row["sigma_omni_db"], 2),
        )

    return table


def format_checks_table(checks: list[dict[str, Any]]) -> Table:
    """Format acceptance checks with pass/fail status."""
    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("Check", style="green")
    table.add_column("Value", justify="right")
    table.add_column("Expected", justify="right")
    table.add_column("Status")

    for check in checks:
        status = "[green]pass[/]" if check["passed"] else "[red]FAIL[/]"
        table.add_row(check["name"], _fmt(check["value"], 4), str(check["expected"]), status)

    return table


def format_calibration_detail(result: dict[str, Any]) -> Panel:
    """Format a stored calibration for detailed display."""
    params = result["params"]
    targets = result["targets"]
    lines = [
        f"[bold cyan]Scenario:[/] {params['kind']}",
        f"[bold cyan]Converged:[/] {result['converged']} after {result['n_evals']} evaluations",
        f"[bold cyan]log DS:[/] {_fmt(result['achieved_log_ds'])} (target {_fmt(targets['mu_log_ds'])})",
        f"[bold cyan]log ASA:[/] {_fmt(result['achieved_log_asa'])} (target {_fmt(targets['mu_log_asa'])})",
        "",
        "[bold cyan]Free parameters:[/]",
    ]
    for name in ("k_factor_db", "xi_db", "r_tau", "r_phi", "r_tau_c", "r_phi_c"):
        lines.append(f"  {name} = {_fmt(params[name], 4)}")

    border = "green" if result["converged"] else "yellow"
    return Panel("\n".join(lines), title="[bold]Calibration[/]", border_style=border)


def write_json(path: Path, data: Any) -> Path:
    """Write JSON with sorted keys so identical data gives identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_ndjson(path: Path, records: Iterable[dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, rows: list[dict[str, Any]], fieldnames: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    return path


def print_success(message: str) -> None:
    """Print a success message."""
    console.print(f"[green]{message}[/]")


def print_error(message: str) -> None:
    """Print an error message."""
    console.print(f"[red]Error: {message}[/]")


def print_warning(message: str) -> None:
    """Print a warning message."""
    console.print(f"[yellow]Warning: {message}[/]")
