"""CLI interface."""
import sys
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from .core import EXIT_FAIL, Lab
from .report import format_params

console = Console()
err_console = Console(stderr=True)

@click.group()
@click.option("--path", "-p", type=click.Path(exists=True, file_okay=False),
              help="Project path (holds .levylab/ and results/)")
@click.pass_context
def main(ctx, path):
    """Malliavin calculus lab for finite-activity Levy processes."""
    ctx.ensure_object(dict)
    ctx.obj["lab"] = Lab(Path(path) if path else None)

@main.command()
@click.argument("config", type=click.Path())
@click.option("--seed", type=int, help="Override the config seed")
@click.option("--reps", type=int, help="Override the replicate count")
@click.option("--gate", type=float, help="Override the k-stderr gate")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path")
@click.pass_context
def run(ctx, config, seed, reps, gate, out):
    """Run the experiment a config file names."""
    lab = ctx.obj["lab"]
    result = lab.run(config, seed=seed, reps=reps, gate=gate, out=out)

    if "rows" not in result:
        err_console.print(f"[red]Error: {result['error']}[/red]")
        sys.exit(result["exit_code"])

    table = Table(title=result["experiment"])
    table.add_column("Params")
    table.add_column("Estimate", justify="right")
    table.add_column("Stderr", justify="right")
    table.add_column("Target", justify="right")
    table.add_column("Pass")
    for row in result["rows"]:
        verdict = "[green]pass[/green]" if row.passed else "[red]FAIL[/red]"
        target = "" if row.target is None else f"{row.target:.6g}"
        table.add_row(format_params(row.params)[:60], f"{row.estimate:.6g}",
                      f"{row.stderr:.3g}", target, verdict)
    console.print(table)

    total = len(result["rows"])
    console.print(f"Rows: {total}, failing: {result['failed']}, "
                  f"{result['seconds']:.1f}s -> {result['csv_path']}")
    if result["exit_code"] == EXIT_FAIL:
        err_console.print(f"[red]{result['failed']} of {total} rows failed[/red]")
    sys.exit(result["exit_code"])

@main.command("list")
@click.pass_context
def list_experiments(ctx):
    """List the available experiments."""
    lab = ctx.obj["lab"]
    table = Table(title="Experiments")
    table.add_column("Name", no_wrap=True)
    table.add_column("Description")
    for info in lab.list_experiments():
        table.add_row(info["name"], info["description"])
    console.print(table)

@main.command()
@click.option("--limit", "-n", default=20, help="Number of runs to show")
@click.option("--experiment", "-e", help="Only runs of this experiment")
@click.pass_context
def history(ctx, limit, experiment):
    """Show recent runs."""
    lab = ctx.obj["lab"]
    runs = lab.history(limit, experiment)

    if not runs:
        console.print("[yellow]No runs yet[/yellow]")
        return

    table = Table(title="Runs")
    table.add_column("ID")
    table.add_column("Experiment", no_wrap=True)
    table.add_column("Seed")
    table.add_column("Reps")
    table.add_column("Rows")
    table.add_column("Status")
    table.add_column("Started")
    for r in runs:
        color = {"passed": "green", "failed": "red", "error": "red"}.get(r["status"], "white")
        rows = f"{r['row_count'] - r['failed_rows']}/{r['row_count']}"
        table.add_row(str(r["id"]), r["experiment"], r["seed"], str(r["replicates"]), rows,
                      f"[{color}]{r['status']}[/{color}]", r["started_at"])
    console.print(table)


if __name__ == "__main__":
    main()
