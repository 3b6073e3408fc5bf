"""trace-bench: replay and memory-scaling benchmarks from the command line."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from ..config import load_config
from ..errors import SamplingUnavailable
from ..gateway import DebounceConfig
from ..mocknode import MockBehavior
from .memory import measure_memory
from .replay import replay_trace
from .report import emit_report, render_figure
from .traces import load_trace, reference_trace

logger = logging.getLogger(__name__)


def _figure_path(out: Path) -> Path:
    return out.with_suffix(".png")


@click.group()
def main() -> None:
    """Benchmark the gateway: debounce traffic reduction and memory scaling."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


@main.command()
@click.option("--trace", "trace_path", type=click.Path(exists=True), default=None,
              help="Trace file (JSON lines); defaults to the shipped hello-world trace.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Service config supplying the debounce delays.")
@click.option("--out", "out_path", type=click.Path(), default="report.json")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "markdown"]), default="json")
@click.option("--plot/--no-plot", default=True, help="Render the companion figure.")
def replay(trace_path: str | None, config_path: str | None, out_path: str, fmt: str, plot: bool) -> None:
    """Replay a trace with and without debouncing and report the reduction."""
    trace = load_trace(trace_path) if trace_path else reference_trace()
    config = load_config(config_path).debounce.debounce_config() if config_path else DebounceConfig()
    report = replay_trace(trace, config)
    out = emit_report(report, Path(out_path), fmt)
    click.echo(
        f"{report.scenario}: without={report.total_without} with={report.total_with} "
        f"reduction={report.reduction_pct:.1f}% -> {out}"
    )
    if plot:
        figure = render_figure(report, _figure_path(Path(out_path)))
        click.echo(f"figure -> {figure}")


@main.command()
@click.option("--sessions", "sessions_arg", default="1,2,3,4,5",
              help="Comma-separated session counts, e.g. 1,2,3,4,5.")
@click.option("--mode", type=click.Choice(["synthetic", "sampled"]), default="synthetic")
@click.option("--per-session-cost", "per_session_cost", type=int, default=MockBehavior().per_session_memory_cost,
              help="Mock node's per-session memory cost in bytes.")
@click.option("--out", "out_path", type=click.Path(), default="memory.json")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "markdown"]), default="json")
@click.option("--plot/--no-plot", default=True, help="Render the companion figure.")
def memory(sessions_arg: str, mode: str, per_session_cost: int, out_path: str, fmt: str, plot: bool) -> None:
    """Measure memory versus session count and fit the scaling line."""
    try:
        counts = sorted({int(part) for part in sessions_arg.split(",") if part.strip()})
    except ValueError:
        raise click.BadParameter("--sessions must be comma-separated integers") from None
    if not counts:
        raise click.BadParameter("--sessions must name at least one count")
    behavior = MockBehavior(per_session_memory_cost=per_session_cost)
    try:
        series = measure_memory(counts, mode=mode, behavior=behavior)
    except SamplingUnavailable as exc:
        click.echo(f"sampling unavailable ({exc}); falling back to synthetic mode", err=True)
        series = measure_memory(counts, mode="synthetic", behavior=behavior)
    out = emit_report(series, Path(out_path), fmt)
    click.echo(
        f"{series.mode}: slope={series.slope / (1024 * 1024):.3f} MiB/session "
        f"intercept={series.intercept / (1024 * 1024):.1f} MiB r2={series.r2:.4f} -> {out}"
    )
    if plot:
        figure = render_figure(series, _figure_path(Path(out_path)))
        click.echo(f"figure -> {figure}")


if __name__ == "__main__":
    sys.exit(main())
