"""Shared controller state: request log, rule tables, sliding window.

Two rule tables drive every switching decision.  The base table holds
per-model aggregates measured offline (energy bounds and mean
confidence); the runtime table starts as a copy of those aggregates
and, depending on the policy, tracks the live system with the latest
energy sample and a running confidence mean over the last k requests.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from math import isfinite

from .errors import EmptyWindowError, ConfigError, ValidationError

LOG_COLUMNS = (
    "request_id",
    "arrival_time",
    "model",
    "energy_j",
    "confidence",
    "model_proc_time_s",
    "system_proc_time_s",
    "detections",
)

RULE_COLUMNS = ("model", "e_min", "e_max", "e_latest", "c_avg")


@dataclass(frozen=True)
class ModelId:
    """Identity of one model variant: 1-based index plus a short name."""

    index: int
    name: str

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationError(f"model index must be >= 1, got {self.index}")
        if not self.name:
            raise ValidationError("model name must be non-empty")


@dataclass(frozen=True)
class RequestLogEntry:
    """One processed request as recorded by the monitor."""

    request_id: int
    arrival_time: float
    model: ModelId
    energy_j: float
    confidence: float
    model_proc_time_s: float
    system_proc_time_s: float
    detections: int

    def __post_init__(self) -> None:
        if self.request_id < 0:
            raise ValidationError(f"request_id must be >= 0, got {self.request_id}")
        if self.energy_j < 0 or not isfinite(self.energy_j):
            raise ValidationError(f"energy_j must be finite and >= 0, got {self.energy_j}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.model_proc_time_s < 0:
            raise ValidationError("model_proc_time_s must be >= 0")
        # system time includes queueing delay on top of model time
        if self.system_proc_time_s < self.model_proc_time_s:
            raise ValidationError(
                f"system_proc_time_s ({self.system_proc_time_s}) < "
                f"model_proc_time_s ({self.model_proc_time_s})"
            )
        if self.detections < 0:
            raise ValidationError("detections must be >= 0")


class LogRepository:
    """Append-only store of processed requests, ordered by request id."""

    def __init__(self) -> None:
        self._entries: list[RequestLogEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i):
        return self._entries[i]

    def append(self, entry: RequestLogEntry) -> None:
        if self._entries and entry.request_id <= self._entries[-1].request_id:
            raise ValidationError(
                f"request ids must be strictly increasing: "
                f"{entry.request_id} after {self._entries[-1].request_id}"
            )
        self._entries.append(entry)

    def last(self) -> RequestLogEntry:
        if not self._entries:
            raise EmptyWindowError("log repository is empty")
        return self._entries[-1]

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for e in self._entries:
                w.writerow(
                    [
                        e.request_id,
                        repr(e.arrival_time),
                        e.model.name,
                        repr(e.energy_j),
                        repr(e.confidence),
                        repr(e.model_proc_time_s),
                        repr(e.system_proc_time_s),
                        e.detections,
                    ]
                )


def log_request(repo: LogRepository, entry: RequestLogEntry) -> None:
    """Record one processed request; ids must arrive in increasing order."""
    repo.append(entry)


@dataclass(frozen=True)
class BaseRuleRow:
    """Offline aggregates for one model: energy bounds and mean confidence."""

    model: ModelId
    e_min: float
    e_max: float
    c_avg: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.e_min <= self.e_max:
            raise ValidationError(
                f"need 0 <= e_min <= e_max, got ({self.e_min}, {self.e_max})"
            )
        if not 0.0 <= self.c_avg <= 1.0:
            raise ValidationError(f"c_avg must be in [0, 1], got {self.c_avg}")


@dataclass
class RuntimeRuleRow:
    """Live aggregates for one model.

    e_latest is the most recent energy sample seen while this model was
    active; c_avg is the mean of c_window, a ring buffer of the last k
    confidence values.  The window is seeded with the offline c_avg so
    the mean is defined before the model has served any request.
    """

    model: ModelId
    e_min: float
    e_max: float
    e_latest: float
    c_avg: float
    c_window: deque = field(repr=False)

    def energy_midpoint(self) -> float:
        """Energy reference used by the analyzer: (e_min + e_max) / 2."""
        return (self.e_min + self.e_max) / 2.0


def init_runtime_rules(base: list[BaseRuleRow], k: int) -> list[RuntimeRuleRow]:
    """Build the runtime table from offline aggregates.

    e_latest starts at the energy midpoint and each confidence window is
    seeded with the offline mean as a single pseudo-observation.
    """
    if not base:
        raise ConfigError("base rule table is empty")
    if k < 1:
        raise ConfigError(f"window size k must be >= 1, got {k}")
    rows = []
    for b in base:
        mid = (b.e_min + b.e_max) / 2.0
        rows.append(
            RuntimeRuleRow(
                model=b.model,
                e_min=b.e_min,
                e_max=b.e_max,
                e_latest=mid,
                c_avg=b.c_avg,
                c_window=deque([b.c_avg], maxlen=k),
            )
        )
    return rows


def update_runtime_rules(row: RuntimeRuleRow, energy: float, confidence: float) -> RuntimeRuleRow:
    """Fold one observation into a runtime row.

    Replaces e_latest, pushes the confidence into the ring buffer
    (evicting the oldest value when full) and recomputes c_avg from the
    buffer contents so the mean never drifts.
    """
    if energy < 0 or not isfinite(energy):
        raise ValidationError(f"energy must be finite and >= 0, got {energy}")
    if not 0.0 <= confidence <= 1.0:
        raise ValidationError(f"confidence must be in [0, 1], got {confidence}")
    row.e_latest = energy
    row.c_window.append(confidence)
    row.c_avg = sum(row.c_window) / len(row.c_window)
    return row


def update_confidence_only(row: RuntimeRuleRow, confidence: float) -> RuntimeRuleRow:
    """Confidence-side update that leaves every energy field untouched."""
    if not 0.0 <= confidence <= 1.0:
        raise ValidationError(f"confidence must be in [0, 1], got {confidence}")
    row.c_window.append(confidence)
    row.c_avg = sum(row.c_window) / len(row.c_window)
    return row


class SlidingWindow:
    """Ring buffer over the last k processed requests.

    Keeps paired energy/confidence values; stats() returns their means
    and raises EmptyWindowError when no observation has been pushed.
    """

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ConfigError(f"window size k must be >= 1, got {k}")
        self.k = k
        self._energy: deque = deque(maxlen=k)
        self._confidence: deque = deque(maxlen=k)

    def __len__(self) -> int:
        return len(self._energy)

    def push(self, energy: float, confidence: float) -> None:
        self._energy.append(energy)
        self._confidence.append(confidence)

    def latest(self) -> tuple[float, float]:
        if not self._energy:
            raise EmptyWindowError("sliding window has no observations")
        return self._energy[-1], self._confidence[-1]

    def stats(self) -> tuple[float, float]:
        if not self._energy:
            raise EmptyWindowError("sliding window has no observations")
        n = len(self._energy)
        return sum(self._energy) / n, sum(self._confidence) / n


def window_stats(window: SlidingWindow) -> tuple[float, float]:
    """Mean energy and mean confidence over the window's observations."""
    return window.stats()


def export_base_rules_csv(rows: list[BaseRuleRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("model", "e_min", "e_max", "c_avg"))
        for r in rows:
            w.writerow([r.model.name, repr(r.e_min), repr(r.e_max), repr(r.c_avg)])


def load_base_rules_csv(path) -> list[BaseRuleRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"model", "e_min", "e_max", "c_avg"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise TraceParseError(str(path), 1, f"expected columns {sorted(expected)}")
        for i, rec in enumerate(reader, start=2):
            try:
                rows.append(
                    BaseRuleRow(
                        model=ModelId(index=len(rows) + 1, name=rec["model"]),
                        e_min=float(rec["e_min"]),
                        e_max=float(rec["e_max"]),
                        c_avg=float(rec["c_avg"]),
                    )
                )
            except (ValueError, ValidationError) as exc:
                raise TraceParseError(str(path), i, str(exc)) from exc
    if not rows:
        raise TraceParseError(str(path), 1, "no rule rows found")
    return rows


def export_runtime_rules_csv(rows: list[RuntimeRuleRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RULE_COLUMNS)
        for r in rows:
            w.writerow(
                [r.model.name, repr(r.e_min), repr(r.e_max), repr(r.e_latest), repr(r.c_avg)]
            )
