"""Figure rendering for run reports.

Figures are derived views of the delimited exports, written next to
them: a score histogram, the energy-versus-confidence point cloud with
its trade-off reference line, the cumulative energy curve, and the
switch timeline.  The CSVs stay the source of truth.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import RunReport

# keep point clouds legible and files small on long runs
_MAX_SCATTER_POINTS = 4000


def render_histogram(report: RunReport, path) -> None:
    edges = report.histogram.edges()
    labels = [f"{int(lo)}-{int(hi)}" for lo, hi in edges[:-1]] + [f"{int(edges[-1][0])}+"]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(labels)), report.histogram.counts, color="tab:blue")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("score bin (energy x (1 - confidence))")
    ax.set_ylabel("requests")
    ax.set_title(f"Score distribution: {report.approach}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_tradeoff(report: RunReport, path) -> None:
    points = report.points
    step = max(1, len(points) // _MAX_SCATTER_POINTS)
    sampled = points[::step]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(
        [p.energy_j for p in sampled],
        [p.confidence for p in sampled],
        s=4,
        alpha=0.35,
        color="tab:green",
        edgecolors="none",
    )
    if points:
        e_values = [p.energy_j for p in points]
        c_values = [p.confidence for p in points]
        ax.plot(
            [min(e_values), max(e_values)],
            [min(c_values), max(c_values)],
            color="tab:red",
            linewidth=1.2,
            label="trade-off reference",
        )
        ax.legend(loc="lower right")
    ax.set_xlabel("energy per request (J)")
    ax.set_ylabel("confidence")
    ax.set_title(f"Energy vs confidence: {report.approach}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_energy_trend(report: RunReport, path) -> None:
    total = 0.0
    cumulative = []
    for p in report.points:
        total += p.energy_j
        cumulative.append(total)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(1, len(cumulative) + 1), cumulative, color="tab:orange", linewidth=1.0)
    ax.set_xlabel("processed requests")
    ax.set_ylabel("cumulative inference energy (J)")
    ax.set_title(f"Energy trend: {report.approach}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_switch_timeline(report: RunReport, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    events = report.switch_events
    if events:
        times = [ev.virtual_time_s for ev in events]
        indices = [ev.to_model.index for ev in events]
        # prepend the starting model so the step plot covers the whole run
        times = [0.0] + times
        indices = [events[0].from_model.index] + indices
        ax.step(times, indices, where="post", color="tab:purple", linewidth=1.0)
        names = {}
        for ev in events:
            names[ev.from_model.index] = ev.from_model.name
            names[ev.to_model.index] = ev.to_model.name
        ticks = sorted(names)
        ax.set_yticks(ticks)
        ax.set_yticklabels([names[i] for i in ticks])
    else:
        ax.text(0.5, 0.5, "no switches", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("virtual time (s)")
    ax.set_ylabel("active model")
    ax.set_title(f"Switch timeline: {report.approach}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_run_figures(report: RunReport, out_dir: str) -> list[str]:
    """All per-run figures; returns the written paths."""
    written = []
    for name, renderer in (
        ("histogram.png", render_histogram),
        ("tradeoff.png", render_tradeoff),
        ("energy_trend.png", render_energy_trend),
        ("switches.png", render_switch_timeline),
    ):
        path = os.path.join(out_dir, name)
        renderer(report, path)
        written.append(path)
    return written


def render_overview_figure(reports: Sequence[RunReport], path) -> None:
    """Mean energy and confidence side by side for a set of approaches."""
    labels = [r.approach for r in reports]
    x = range(len(labels))
    fig, (ax_e, ax_c) = plt.subplots(1, 2, figsize=(max(9, 1.3 * len(labels)), 4))
    ax_e.bar(x, [r.e_total for r in reports], color="tab:orange", label="total")
    ax_e.bar(x, [r.e_avg for r in reports], color="tab:blue", label="inference")
    ax_e.set_ylabel("energy per request (J)")
    ax_e.legend(loc="upper left")
    ax_c.bar(x, [r.c_avg for r in reports], color="tab:green")
    ax_c.set_ylabel("mean confidence")
    ax_c.set_ylim(0, 1)
    for ax in (ax_e, ax_c):
        ax.set_xticks(list(x))
        ax.set_xticklabels(labels, rotation=45, ha="right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
