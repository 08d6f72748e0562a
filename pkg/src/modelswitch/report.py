"""Run summaries: score histograms, per-approach aggregates, exports.

Scores are binned into unit-wide half-open intervals [0,1) .. [6,7)
plus one overflow bin for everything at 7 and above; expensive
low-confidence models concentrate there.  All delimited output uses
repr() float formatting, so identical reports serialize to identical
bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ValidationError
from .knowledge import LogRepository
from .mapek import PhaseTotals, SwitchEvent, compute_score

N_FINITE_BINS = 7
OVERFLOW_BIN = N_FINITE_BINS  # [7, inf)

SUMMARY_COLUMNS = (
    "approach",
    "c_avg",
    "e_avg",
    "e_monitor",
    "e_analyzer",
    "e_planner",
    "e_executor",
    "e_mapek",
    "e_total",
    "switches",
)

HISTOGRAM_COLUMNS = ("approach", "bin_lo", "bin_hi", "count")
POINTS_COLUMNS = ("request_id", "model", "energy_j", "confidence", "score")
TIMELINE_COLUMNS = ("tick", "virtual_time_s", "from_model", "to_model", "reason")


def bin_score(score: float) -> int:
    """Histogram bin index for a score; 7 is the overflow bin [7, inf)."""
    if score < 0:
        raise ValidationError(f"score must be >= 0, got {score}")
    if score >= N_FINITE_BINS:
        return OVERFLOW_BIN
    return int(score)


@dataclass
class ScoreHistogram:
    """Counts per score bin; the last slot is the overflow bin."""

    counts: list[int] = field(default_factory=lambda: [0] * (N_FINITE_BINS + 1))

    def __post_init__(self) -> None:
        if len(self.counts) != N_FINITE_BINS + 1:
            raise ValidationError(f"histogram needs {N_FINITE_BINS + 1} bins")
        if any(c < 0 for c in self.counts):
            raise ValidationError("histogram counts must be >= 0")

    def add(self, score: float) -> None:
        self.counts[bin_score(score)] += 1

    def total(self) -> int:
        return sum(self.counts)

    def edges(self) -> list[tuple[float, float]]:
        pairs = [(float(i), float(i + 1)) for i in range(N_FINITE_BINS)]
        pairs.append((float(N_FINITE_BINS), float("inf")))
        return pairs


@dataclass(frozen=True)
class PointRecord:
    request_id: int
    model: str
    energy_j: float
    confidence: float
    score: float


@dataclass
class RunReport:
    """Aggregates of one run, shaped like one comparison-table row."""

    approach: str
    c_avg: float
    e_avg: float
    e_monitor: float
    e_analyzer: float
    e_planner: float
    e_executor: float
    e_mapek: float
    e_total: float
    switches: int
    histogram: ScoreHistogram
    points: list[PointRecord] = field(default_factory=list, repr=False)
    switch_events: list[SwitchEvent] = field(default_factory=list, repr=False)
    cadence: str = "per_request"
    requests: int = 0
    ticks: int = 0
    wrap_count: int = 0
    drop_count: int = 0


def summarize(
    log: LogRepository,
    phases: PhaseTotals,
    switches: int,
    approach: str,
    *,
    switch_events: Sequence[SwitchEvent] = (),
    cadence: str = "per_request",
    ticks: int = 0,
    wrap_count: int = 0,
    drop_count: int = 0,
) -> RunReport:
    """Collapse a request log plus controller accounting into a report.

    Pure function of its inputs: summarizing the same log twice yields
    identical reports.  Phase energies are reported per processed
    request; e_total = e_avg + e_mapek.
    """
    n = len(log)
    if n == 0:
        raise ValidationError("cannot summarize an empty log")
    hist = ScoreHistogram()
    points = []
    c_sum = 0.0
    e_sum = 0.0
    for entry in log:
        score = compute_score(entry.energy_j, entry.confidence)
        hist.add(score)
        c_sum += entry.confidence
        e_sum += entry.energy_j
        points.append(
            PointRecord(
                request_id=entry.request_id,
                model=entry.model.name,
                energy_j=entry.energy_j,
                confidence=entry.confidence,
                score=score,
            )
        )
    e_monitor = phases.monitor / n
    e_analyzer = phases.analyzer / n
    e_planner = phases.planner / n
    e_executor = phases.executor / n
    e_mapek = e_monitor + e_analyzer + e_planner + e_executor
    e_avg = e_sum / n
    return RunReport(
        approach=approach,
        c_avg=c_sum / n,
        e_avg=e_avg,
        e_monitor=e_monitor,
        e_analyzer=e_analyzer,
        e_planner=e_planner,
        e_executor=e_executor,
        e_mapek=e_mapek,
        e_total=e_avg + e_mapek,
        switches=switches,
        histogram=hist,
        points=points,
        switch_events=list(switch_events),
        cadence=cadence,
        requests=n,
        ticks=ticks,
        wrap_count=wrap_count,
        drop_count=drop_count,
    )


def summary_row(report: RunReport) -> list:
    return [
        report.approach,
        repr(report.c_avg),
        repr(report.e_avg),
        repr(report.e_monitor),
        repr(report.e_analyzer),
        repr(report.e_planner),
        repr(report.e_executor),
        repr(report.e_mapek),
        repr(report.e_total),
        report.switches,
    ]


def export_summary_csv(reports: Sequence[RunReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in reports:
            w.writerow(summary_row(r))


def export_histogram_csv(reports: Sequence[RunReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTOGRAM_COLUMNS)
        for r in reports:
            for (lo, hi), count in zip(r.histogram.edges(), r.histogram.counts):
                w.writerow([r.approach, repr(lo), repr(hi), count])


def export_points_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POINTS_COLUMNS)
        for p in report.points:
            w.writerow(
                [p.request_id, p.model, repr(p.energy_j), repr(p.confidence), repr(p.score)]
            )


def export_timeline_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMELINE_COLUMNS)
        for ev in report.switch_events:
            w.writerow(
                [
                    ev.tick,
                    repr(ev.virtual_time_s),
                    ev.from_model.name,
                    ev.to_model.name,
                    ev.reason,
                ]
            )


def export_reference_line_csv(points: Sequence[tuple[float, float]], path) -> None:
    """Two-point trade-off reference: (min e, min c) to (max e, max c)."""
    if not points:
        raise ValidationError("reference line needs at least one (energy, confidence) pair")
    energies = [p[0] for p in points]
    confidences = [p[1] for p in points]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("energy_j", "confidence"))
        w.writerow([repr(min(energies)), repr(min(confidences))])
        w.writerow([repr(max(energies)), repr(max(confidences))])


def export_report_json(report: RunReport, path) -> None:
    """Full scalar summary plus histogram as one JSON document."""
    doc = {
        "approach": report.approach,
        "c_avg": report.c_avg,
        "e_avg": report.e_avg,
        "e_monitor": report.e_monitor,
        "e_analyzer": report.e_analyzer,
        "e_planner": report.e_planner,
        "e_executor": report.e_executor,
        "e_mapek": report.e_mapek,
        "e_total": report.e_total,
        "switches": report.switches,
        "histogram": report.histogram.counts,
        "cadence": report.cadence,
        "requests": report.requests,
        "ticks": report.ticks,
        "wrap_count": report.wrap_count,
        "drop_count": report.drop_count,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_from_json(path) -> RunReport:
    """Rebuild the scalar portion of a report exported as JSON.

    Point and timeline data live in their own CSVs and are not
    round-tripped here.
    """
    with open(path) as fh:
        doc = json.load(fh)
    return RunReport(
        approach=doc["approach"],
        c_avg=doc["c_avg"],
        e_avg=doc["e_avg"],
        e_monitor=doc["e_monitor"],
        e_analyzer=doc["e_analyzer"],
        e_planner=doc["e_planner"],
        e_executor=doc["e_executor"],
        e_mapek=doc["e_mapek"],
        e_total=doc["e_total"],
        switches=doc["switches"],
        histogram=ScoreHistogram(counts=list(doc["histogram"])),
        cadence=doc["cadence"],
        requests=doc["requests"],
        ticks=doc["ticks"],
        wrap_count=doc["wrap_count"],
        drop_count=doc["drop_count"],
    )


def export(report: RunReport, fmt: str, path) -> None:
    """Write one report as 'csv' (summary row) or 'json'."""
    if fmt == "json":
        export_report_json(report, path)
    elif fmt == "csv":
        export_summary_csv([report], path)
    else:
        raise ValidationError(f"unknown export format {fmt!r}")
