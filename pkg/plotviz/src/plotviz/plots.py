"""Figures over benchmark metrics CSVs.

Input is the kvsim per-turn schema: one row per (run_id, turn) with a
``strategy`` label and numeric metric columns. Files are only ever read;
rerunning a plot just overwrites the output image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import mean
from typing import Sequence

from matplotlib.figure import Figure

GROWTH_METRIC = "cache_mb_end_generation"
COMPARISON_METRICS = ("cache_mb_end_generation", "sim_tokens_per_s", "sim_eviction_ms")
BASELINE_STRATEGY = "baseline"


@dataclass(frozen=True)
class PlotSpec:
    csv_paths: tuple[Path, ...]
    out_path: Path
    threshold_mb: float | None = None
    metrics: tuple[str, ...] = (GROWTH_METRIC,)


def read_rows(csv_paths: Sequence[Path]) -> list[dict[str, str]]:
    rows: list[dict[str, str]] = []
    for path in csv_paths:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rows.append(row)
    if not rows:
        raise ValueError("no data rows found in the given CSV file(s)")
    return rows


def _require_columns(rows: list[dict[str, str]], columns: Sequence[str]) -> None:
    header = rows[0].keys()
    for column in ("run_id", "strategy", "turn", *columns):
        if column not in header:
            raise ValueError(f"column '{column}' not found in CSV header")


def _series_by_strategy(rows, metric):
    """strategy -> (turns, values), each sorted by turn."""
    grouped: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        grouped.setdefault(row["strategy"], []).append(
            (int(row["turn"]), float(row[metric]))
        )
    series = {}
    for strategy, points in grouped.items():
        points.sort()
        series[strategy] = ([t for t, _ in points], [v for _, v in points])
    return series


def build_growth_figure(spec: PlotSpec) -> tuple[Figure, dict]:
    metric = spec.metrics[0]
    rows = read_rows(spec.csv_paths)
    _require_columns(rows, [metric])
    series = _series_by_strategy(rows, metric)

    fig = Figure(figsize=(8, 4.5))
    ax = fig.add_subplot()
    for strategy in sorted(series):
        turns, values = series[strategy]
        ax.plot(turns, values, marker="o", label=strategy)
    if spec.threshold_mb is not None:
        ax.axhline(
            spec.threshold_mb,
            color="red",
            linestyle="--",
            label=f"threshold {spec.threshold_mb:g} MiB",
        )
    ax.set_xlabel("turn")
    ax.set_ylabel(metric)
    ax.set_title("Cache size per turn, end of generation")
    ax.legend()
    fig.tight_layout()
    return fig, series


def plot_growth(spec: PlotSpec) -> Path:
    fig, _ = build_growth_figure(spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    return out


def percent_change_table(
    rows: list[dict[str, str]], metrics: Sequence[str]
) -> dict[str, dict[str, float]]:
    """Per-strategy percent change vs the baseline run's per-turn mean.

    Metrics whose baseline mean is zero are omitted (no reference to change
    from). The baseline itself is the zero reference and gets no entry.
    """
    _require_columns(rows, metrics)
    by_strategy: dict[str, list[dict[str, str]]] = {}
    for row in rows:
        by_strategy.setdefault(row["strategy"], []).append(row)
    if BASELINE_STRATEGY not in by_strategy:
        raise ValueError("no baseline run present in the CSV data")

    def metric_mean(strategy: str, metric: str) -> float:
        return mean(float(r[metric]) for r in by_strategy[strategy])

    table: dict[str, dict[str, float]] = {}
    for strategy in sorted(by_strategy):
        if strategy == BASELINE_STRATEGY:
            continue
        table[strategy] = {}
        for metric in metrics:
            reference = metric_mean(BASELINE_STRATEGY, metric)
            if reference == 0.0:
                continue
            value = metric_mean(strategy, metric)
            table[strategy][metric] = (value - reference) / reference * 100.0
    return table


def build_comparison_figure(spec: PlotSpec) -> tuple[Figure, dict]:
    rows = read_rows(spec.csv_paths)
    table = percent_change_table(rows, spec.metrics)
    strategies = list(table)
    plotted_metrics = [m for m in spec.metrics if any(m in table[s] for s in strategies)]

    fig = Figure(figsize=(8, 4.5))
    ax = fig.add_subplot()
    width = 0.8 / max(len(strategies), 1)
    for i, strategy in enumerate(strategies):
        xs = [j + i * width for j in range(len(plotted_metrics))]
        ys = [table[strategy].get(m, 0.0) for m in plotted_metrics]
        ax.bar(xs, ys, width=width, label=strategy)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(
        [j + width * (len(strategies) - 1) / 2 for j in range(len(plotted_metrics))]
    )
    ax.set_xticklabels(plotted_metrics, rotation=15, ha="right")
    ax.set_ylabel("% change vs baseline")
    ax.set_title("Strategy comparison, percent change from baseline")
    fig.text(0.01, 0.01, "per-strategy means over turns vs the baseline means", fontsize=7)
    ax.legend()
    fig.tight_layout(rect=(0, 0.04, 1, 1))
    return fig, table


def plot_comparison(spec: PlotSpec) -> Path:
    fig, _ = build_comparison_figure(spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    return out
