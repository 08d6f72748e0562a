"""Request arrivals and the FIFO queue in front of the single server.

Arrival traces are plain text, one timestamp per line, normalized so
the first request arrives at t=0.  Synthetic workloads draw
exponential inter-arrival gaps, which mirrors the bursty single-stream
texture of web request logs without shipping one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TraceParseError, ValidationError


@dataclass(frozen=True)
class ArrivalTrace:
    """Monotone arrival times in seconds, first arrival at t=0."""

    times: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.times:
            raise ValidationError("arrival trace is empty")
        if self.times[0] != 0.0:
            raise ValidationError("arrival trace must be normalized to start at 0")
        for a, b in zip(self.times, self.times[1:]):
            if b < a:
                raise ValidationError(f"arrival times must be non-decreasing ({b} after {a})")

    def __len__(self) -> int:
        return len(self.times)


def load_arrival_trace(path) -> ArrivalTrace:
    """Parse a one-timestamp-per-line file and normalize it to t=0.

    Blank lines are ignored; a malformed or decreasing timestamp is
    reported with its line number.
    """
    raw: list[float] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError as exc:
                raise TraceParseError(str(path), line_no, f"not a timestamp: {text!r}") from exc
            if raw and value < raw[-1]:
                raise TraceParseError(
                    str(path), line_no, f"timestamp {value} decreases from {raw[-1]}"
                )
            raw.append(value)
    if not raw:
        raise TraceParseError(str(path), 1, "no timestamps found")
    t0 = raw[0]
    return ArrivalTrace(times=tuple(t - t0 for t in raw))


def save_arrival_trace(trace: ArrivalTrace, path) -> None:
    with open(path, "w") as fh:
        for t in trace.times:
            fh.write(f"{t!r}\n")


def synth_arrivals(n: int, rate: float, seed: int) -> ArrivalTrace:
    """n arrivals with exponential gaps of mean 1/rate, starting at t=0."""
    if n < 1:
        raise ConfigError(f"need at least one arrival, got n={n}")
    if rate <= 0:
        raise ConfigError(f"arrival rate must be > 0, got {rate}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    gaps = rng.exponential(1.0 / rate, n - 1)
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    return ArrivalTrace(times=tuple(float(t) for t in times))


class RequestQueue:
    """FIFO queue of (request_id, arrival_time) pairs.

    Unbounded by default.  With a capacity, an arrival that finds the
    queue full is dropped (the newest request loses) and counted.
    """

    def __init__(self, capacity: int | None = None) -> None:
        if capacity is not None and capacity < 1:
            raise ConfigError(f"queue capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.dropped = 0
        self._items: deque = deque()

    def __len__(self) -> int:
        return len(self._items)

    def empty(self) -> bool:
        return not self._items

    def offer(self, request_id: int, arrival_time: float) -> bool:
        """Enqueue unless full; returns False when the request is dropped."""
        if self.capacity is not None and len(self._items) >= self.capacity:
            self.dropped += 1
            return False
        self._items.append((request_id, arrival_time))
        return True

    def peek(self) -> tuple[int, float]:
        if not self._items:
            raise ConfigError("peek on empty queue")
        return self._items[0]

    def take(self) -> tuple[int, float]:
        if not self._items:
            raise ConfigError("take on empty queue")
        return self._items.popleft()
