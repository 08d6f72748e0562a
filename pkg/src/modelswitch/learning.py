"""Offline evaluation that seeds the rule tables.

Before any adaptive run, every model variant is evaluated on the same
request set.  The per-request results form one performance matrix per
model; collapsing a matrix to (min energy, max energy, mean confidence)
yields that model's base rule row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, TraceParseError, ValidationError
from .knowledge import BaseRuleRow
from .profiles import ModelProfile, ProfileSampler

PERFORMANCE_COLUMNS = ("request_id", "energy_j", "confidence", "proc_time_s")


@dataclass(frozen=True)
class EvaluationDataset:
    """Request ids used for offline evaluation; shared across models."""

    request_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.request_ids:
            raise ConfigError("evaluation dataset is empty")
        if len(set(self.request_ids)) != len(self.request_ids):
            raise ValidationError("evaluation request ids must be unique")
        if min(self.request_ids) < 0:
            raise ValidationError("evaluation request ids must be >= 0")

    @classmethod
    def of_size(cls, n: int) -> "EvaluationDataset":
        if n < 1:
            raise ConfigError(f"evaluation dataset size must be >= 1, got {n}")
        return cls(request_ids=tuple(range(n)))


@dataclass(frozen=True)
class PerformanceRecord:
    request_id: int
    energy_j: float
    confidence: float
    proc_time_s: float


@dataclass(frozen=True)
class PerformanceMatrix:
    """Per-request evaluation results for one model."""

    model_name: str
    records: tuple[PerformanceRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise ValidationError("performance matrix has no records")

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PERFORMANCE_COLUMNS)
            for r in self.records:
                w.writerow(
                    [r.request_id, repr(r.energy_j), repr(r.confidence), repr(r.proc_time_s)]
                )


def load_performance_csv(path, model_name: str) -> PerformanceMatrix:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != PERFORMANCE_COLUMNS:
            raise TraceParseError(str(path), 1, f"expected columns {PERFORMANCE_COLUMNS}")
        for i, rec in enumerate(reader, start=2):
            try:
                records.append(
                    PerformanceRecord(
                        request_id=int(rec["request_id"]),
                        energy_j=float(rec["energy_j"]),
                        confidence=float(rec["confidence"]),
                        proc_time_s=float(rec["proc_time_s"]),
                    )
                )
            except ValueError as exc:
                raise TraceParseError(str(path), i, str(exc)) from exc
    if not records:
        raise TraceParseError(str(path), 1, "no performance records found")
    return PerformanceMatrix(model_name=model_name, records=tuple(records))


def evaluate_model(
    profile: ModelProfile, dataset: EvaluationDataset, seed: int
) -> PerformanceMatrix:
    """Run one model over the evaluation set.

    Deterministic for a fixed (profile, dataset, seed): each request id
    maps to the same sample regardless of evaluation order.
    """
    sampler = ProfileSampler([profile], seed)
    records = []
    for rid in dataset.request_ids:
        m = sampler.sample(profile.model, rid)
        records.append(
            PerformanceRecord(
                request_id=rid,
                energy_j=m.energy_j,
                confidence=m.confidence,
                proc_time_s=m.proc_time_s,
            )
        )
    return PerformanceMatrix(model_name=profile.model.name, records=tuple(records))


def aggregate_rules(matrix: PerformanceMatrix, model) -> BaseRuleRow:
    """Collapse a performance matrix to one base rule row."""
    energies = [r.energy_j for r in matrix.records]
    confidences = [r.confidence for r in matrix.records]
    return BaseRuleRow(
        model=model,
        e_min=min(energies),
        e_max=max(energies),
        c_avg=sum(confidences) / len(confidences),
    )


def build_base_rules(
    profiles: Sequence[ModelProfile], dataset: EvaluationDataset, seed: int
) -> tuple[list[PerformanceMatrix], list[BaseRuleRow]]:
    """Evaluate every profile and aggregate the base rule table.

    Table order follows model index.  The aggregates are invariant to
    the order of request ids inside the dataset.
    """
    if not profiles:
        raise ConfigError("no model profiles to evaluate")
    matrices = []
    rows = []
    for profile in sorted(profiles, key=lambda p: p.model.index):
        matrix = evaluate_model(profile, dataset, seed)
        matrices.append(matrix)
        rows.append(aggregate_rules(matrix, profile.model))
    return matrices, rows
