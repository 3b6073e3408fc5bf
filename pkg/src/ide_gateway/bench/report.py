"""Report serialization (json/csv/markdown) and companion figures.

CSV schemas are fixed:
  TrafficReport: ``scenario,without,with,reduction_pct`` (one data row)
  MemorySeries:  ``sessions,resident_bytes`` (one row per point)

Figures render with the Agg backend next to the delimited output: a
with/without bar chart for traffic reports and a scatter plus fitted
line for memory series.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .memory import MemorySeries
from .replay import TrafficReport

TRAFFIC_CSV_HEADER = ["scenario", "without", "with", "reduction_pct"]
MEMORY_CSV_HEADER = ["sessions", "resident_bytes"]


def emit_report(report: TrafficReport | MemorySeries, path: str | Path, fmt: str = "json") -> Path:
    """Write the report deterministically in the requested format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            if isinstance(report, TrafficReport):
                writer.writerow(TRAFFIC_CSV_HEADER)
                writer.writerow(
                    [report.scenario, report.total_without, report.total_with, f"{report.reduction_pct:.2f}"]
                )
            else:
                writer.writerow(MEMORY_CSV_HEADER)
                for point in report.points:
                    writer.writerow([point.sessions, point.resident_bytes])
    elif fmt == "markdown":
        path.write_text(_markdown(report), encoding="utf-8")
    else:
        raise ValueError(f"unknown format: {fmt!r}")
    return path


def _markdown(report: TrafficReport | MemorySeries) -> str:
    if isinstance(report, TrafficReport):
        lines = [
            f"# Traffic report: {report.scenario}",
            "",
            f"Total messages without debouncing: **{report.total_without}**, "
            f"with debouncing: **{report.total_with}** "
            f"(reduction {report.reduction_pct:.1f}%).",
            "",
            "| method | without | with | cancelled |",
            "| --- | ---: | ---: | ---: |",
        ]
        for method, item in sorted(report.per_method.items()):
            lines.append(f"| {method} | {item.without_sent} | {item.with_sent} | {item.with_cancelled} |")
        return "\n".join(lines) + "\n"
    lines = [
        f"# Memory series ({report.mode})",
        "",
        f"Fit: slope {report.slope:.0f} B/session, intercept {report.intercept:.0f} B, "
        f"r² {report.r2:.4f}.",
        "",
        "| sessions | resident bytes |",
        "| ---: | ---: |",
    ]
    for point in report.points:
        lines.append(f"| {point.sessions} | {point.resident_bytes} |")
    return "\n".join(lines) + "\n"


def render_figure(report: TrafficReport | MemorySeries, path: str | Path) -> Path:
    """Render the report's figure to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if isinstance(report, TrafficReport):
        ax.bar(["without debouncing", "with debouncing"], [report.total_without, report.total_with],
               color=["#c44e52", "#4c72b0"], width=0.6)
        for x, value in enumerate([report.total_without, report.total_with]):
            ax.annotate(str(value), (x, value), ha="center", va="bottom")
        ax.set_ylabel("messages dispatched")
        ax.set_title(f"{report.scenario}: {report.reduction_pct:.1f}% reduction")
    else:
        xs = [point.sessions for point in report.points]
        ys = [point.resident_bytes / (1024 * 1024) for point in report.points]
        ax.plot(xs, ys, "o", color="#4c72b0", label="measured")
        fit_ys = [(report.slope * x + report.intercept) / (1024 * 1024) for x in xs]
        ax.plot(xs, fit_ys, "-", color="#c44e52",
                label=f"fit: {report.slope / (1024 * 1024):.2f} MiB/session, r²={report.r2:.3f}")
        ax.set_xlabel("sessions")
        ax.set_ylabel("resident memory (MiB)")
        ax.set_title(f"memory scaling ({report.mode})")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
