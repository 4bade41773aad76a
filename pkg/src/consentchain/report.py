"""Figure rendering for the ETL report and benchmark outputs.

Figures are written next to the delimited output using the Agg backend,
so rendering works headless. Nothing here recomputes aggregates — every
plotted number comes straight from a stats object or a bench row.
"""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .contract import PURPOSES
from .etl import ConsentStats

_WEEKDAY_NAMES = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]


def render_stats_figures(stats: ConsentStats, out_path: Path) -> List[Path]:
    """Trend line chart and weekday distribution, named after the export file."""
    out_path = Path(out_path)
    base = out_path.with_suffix("")
    written = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    dates = sorted({d for d, _, _ in stats.trend})
    for purpose in PURPOSES:
        by_date = {d: c for d, p, c in stats.trend if p == purpose}
        ax.plot(dates, [by_date.get(d, 0) for d in dates], marker="o", label=purpose)
    ax.set_title("Consents given per day")
    ax.set_xlabel("date")
    ax.set_ylabel("consents")
    ax.legend()
    if dates:
        fig.autofmt_xdate(rotation=45)
    trend_path = base.parent / (base.name + "_trend.png")
    fig.savefig(trend_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(trend_path)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    counts = [stats.weekday_distribution[k] for k in range(1, 8)]
    ax.bar(_WEEKDAY_NAMES, counts)
    ax.set_title("Consents by weekday")
    ax.set_ylabel("consents")
    weekday_path = base.parent / (base.name + "_weekday.png")
    fig.savefig(weekday_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(weekday_path)

    return written


def render_scalability_figure(rows, out_path: Path) -> Path:
    """Total gas (exactly linear) and measured throughput against batch size."""
    out_path = Path(out_path)
    base = out_path.with_suffix("")
    ns = [r.n for r in rows]
    totals = [r.total_gas for r in rows]
    throughput = [r.records_per_sec for r in rows]

    fig, ax_gas = plt.subplots(figsize=(8, 4.5))
    ax_gas.plot(ns, totals, marker="o", color="tab:blue", label="total gas")
    ax_gas.set_xlabel("batch size (records)")
    ax_gas.set_ylabel("total gas", color="tab:blue")
    ax_gas.tick_params(axis="y", labelcolor="tab:blue")

    ax_tp = ax_gas.twinx()
    ax_tp.plot(ns, throughput, marker="s", color="tab:orange", label="records/s")
    ax_tp.set_ylabel("records / second", color="tab:orange")
    ax_tp.tick_params(axis="y", labelcolor="tab:orange")

    ax_gas.set_title("Batch submission scaling")
    fig_path = base.parent / (base.name + "_scaling.png")
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return fig_path


def render_gas_figure(rows, out_path: Path) -> Path:
    """Per-operation gas bar chart from a gas-bench run."""
    out_path = Path(out_path)
    base = out_path.with_suffix("")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar([r.op for r in rows], [r.gas for r in rows])
    ax.set_ylabel("gas")
    ax.set_title("Gas per operation")
    plt.setp(ax.get_xticklabels(), rotation=45, ha="right")
    fig_path = base.parent / (base.name + "_gas.png")
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return fig_path
