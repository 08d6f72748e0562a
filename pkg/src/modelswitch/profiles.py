"""Synthetic model behavior: calibrated samplers and trace replay.

Each model variant is described by truncated-normal distributions for
energy, confidence and processing time plus an integer range for the
detection count.  Sampling is counter-based: the value drawn for a
given (profile, request id, seed) triple never depends on what else was
sampled, so runs are reproducible and different policies can replay the
exact same per-request behavior.

Calibration note: truncating a normal shifts its mean away from the
location parameter, so profile locations are solved numerically until
the post-truncation mean hits the requested target.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri
from scipy.stats import truncnorm

from .errors import CalibrationError, ConfigError, TraceParseError, ValidationError
from .knowledge import ModelId

# Samples are generated in fixed-size blocks so that lookups vectorize;
# request id r lives at offset r % _CHUNK of block r // _CHUNK.
_CHUNK = 4096

TRACE_COLUMNS = ("model", "energy_j", "confidence", "proc_time_s", "detections")


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal distribution restricted to [lower, upper].

    sd == 0 degenerates to a point mass at the location clipped into the
    bounds, which keeps zero-noise configs valid.
    """

    mean: float
    sd: float
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self) -> None:
        if self.sd < 0 or not math.isfinite(self.sd):
            raise ValidationError(f"sd must be finite and >= 0, got {self.sd}")
        if not math.isfinite(self.mean):
            raise ValidationError("mean must be finite")
        if not self.lower < self.upper:
            raise ValidationError(f"need lower < upper, got [{self.lower}, {self.upper}]")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sd == 0.0:
            return np.full(n, min(max(self.mean, self.lower), self.upper))
        a = ndtr((self.lower - self.mean) / self.sd)
        b = ndtr((self.upper - self.mean) / self.sd)
        u = rng.random(n)
        x = self.mean + self.sd * ndtri(a + u * (b - a))
        # inverse-CDF mapping can overshoot the bounds by float rounding
        return np.clip(x, self.lower, self.upper)

    def true_mean(self) -> float:
        """Exact mean of the truncated distribution."""
        if self.sd == 0.0:
            return min(max(self.mean, self.lower), self.upper)
        a = (self.lower - self.mean) / self.sd
        b = (self.upper - self.mean) / self.sd
        return float(truncnorm.mean(a, b, loc=self.mean, scale=self.sd))


def solve_location(target_mean: float, sd: float, lower: float, upper: float) -> float:
    """Location parameter whose truncated mean equals target_mean.

    The truncated mean is strictly increasing in the location and is
    confined to (lower, upper), so any target outside that open interval
    is unreachable.
    """
    if not (lower < target_mean < upper):
        raise CalibrationError(
            f"target mean {target_mean} is unreachable with bounds [{lower}, {upper}]"
        )
    if sd == 0.0:
        return target_mean

    def gap(loc: float) -> float:
        return TruncatedNormal(loc, sd, lower, upper).true_mean() - target_mean

    lo = (lower - 40.0 * sd) if math.isfinite(lower) else (target_mean - 40.0 * sd)
    hi = (upper + 40.0 * sd) if math.isfinite(upper) else (target_mean + 40.0 * sd)
    try:
        return float(brentq(gap, lo, hi, xtol=1e-13, rtol=8.9e-16))
    except ValueError as exc:
        raise CalibrationError(
            f"could not bracket location for target {target_mean} (sd={sd})"
        ) from exc


@dataclass(frozen=True)
class ModelProfile:
    """Distributional description of one model variant."""

    model: ModelId
    energy: TruncatedNormal
    confidence: TruncatedNormal
    proc_time: TruncatedNormal
    detections: tuple[int, int] = (0, 12)

    def __post_init__(self) -> None:
        if self.energy.lower < 0:
            raise ValidationError("energy lower bound must be >= 0")
        if self.confidence.lower < 0 or self.confidence.upper > 1:
            raise ValidationError("confidence bounds must lie within [0, 1]")
        if self.proc_time.lower < 0:
            raise ValidationError("processing-time lower bound must be >= 0")
        lo, hi = self.detections
        if lo < 0 or hi < lo:
            raise ValidationError(f"bad detections range [{lo}, {hi}]")


class Metrics(NamedTuple):
    energy_j: float
    confidence: float
    proc_time_s: float
    detections: int


def _sample_chunk(profile: ModelProfile, seed: int, chunk_index: int) -> tuple:
    """All four metric arrays for one block of request ids.

    The stream is keyed by (seed, model index, block), and draws happen
    in a fixed order, so the value at any request id is a pure function
    of (profile, request id, seed).
    """
    ss = np.random.SeedSequence([seed, profile.model.index, chunk_index])
    rng = np.random.default_rng(ss)
    energy = profile.energy.sample(rng, _CHUNK)
    conf = profile.confidence.sample(rng, _CHUNK)
    proc = profile.proc_time.sample(rng, _CHUNK)
    lo, hi = profile.detections
    det = rng.integers(lo, hi + 1, _CHUNK)
    return energy, conf, proc, det


def infer(profile: ModelProfile, request_id: int, seed: int) -> Metrics:
    """Simulate one inference; deterministic per (profile, request_id, seed)."""
    if request_id < 0:
        raise ValidationError(f"request_id must be >= 0, got {request_id}")
    energy, conf, proc, det = _sample_chunk(profile, seed, request_id // _CHUNK)
    i = request_id % _CHUNK
    return Metrics(float(energy[i]), float(conf[i]), float(proc[i]), int(det[i]))


class MetricSampler:
    """Interface for anything that can serve per-request metrics."""

    def sample(self, model: ModelId, request_id: int) -> Metrics:
        raise NotImplementedError

    @property
    def wrap_count(self) -> int:
        return 0


class ProfileSampler(MetricSampler):
    """Cached chunk-wise sampler over a set of profiles.

    Equivalent to calling infer() per request but amortizes the block
    generation, which is what makes 25k-request runs cheap.
    """

    def __init__(self, profiles: Sequence[ModelProfile], seed: int) -> None:
        if not profiles:
            raise ConfigError("no model profiles given")
        self.seed = seed
        self._profiles = {p.model.index: p for p in profiles}
        if len(self._profiles) != len(profiles):
            raise ConfigError("duplicate model indices in profile set")
        self._cache: dict[tuple[int, int], tuple] = {}

    @property
    def profiles(self) -> list[ModelProfile]:
        return [self._profiles[i] for i in sorted(self._profiles)]

    def profile_for(self, model: ModelId) -> ModelProfile:
        try:
            return self._profiles[model.index]
        except KeyError:
            raise ConfigError(f"no profile for model index {model.index}") from None

    def sample(self, model: ModelId, request_id: int) -> Metrics:
        profile = self.profile_for(model)
        key = (model.index, request_id // _CHUNK)
        chunk = self._cache.get(key)
        if chunk is None:
            chunk = _sample_chunk(profile, self.seed, key[1])
            self._cache[key] = chunk
        energy, conf, proc, det = chunk
        i = request_id % _CHUNK
        return Metrics(float(energy[i]), float(conf[i]), float(proc[i]), int(det[i]))


class DriftSampler(MetricSampler):
    """Switches from one profile set to another at a fixed request id.

    Both phases share the same seed and block keys, so the drift shows
    up as a parameter shift on top of identical underlying noise.
    """

    def __init__(self, before: ProfileSampler, after: ProfileSampler, at_request: int) -> None:
        if at_request < 0:
            raise ConfigError("drift request index must be >= 0")
        self.before = before
        self.after = after
        self.at_request = at_request

    def sample(self, model: ModelId, request_id: int) -> Metrics:
        src = self.before if request_id < self.at_request else self.after
        return src.sample(model, request_id)


@dataclass
class MetricTrace:
    """Recorded per-request metrics keyed by model name."""

    records: dict[str, list[Metrics]]

    def models(self) -> list[str]:
        return sorted(self.records)


class TraceSampler(MetricSampler):
    """Replays a metric trace per model, wrapping around when exhausted."""

    def __init__(self, trace: MetricTrace) -> None:
        if not trace.records:
            raise ConfigError("metric trace is empty")
        self._trace = trace
        self._cursor: dict[str, int] = {name: 0 for name in trace.records}
        self._wraps = 0

    @property
    def wrap_count(self) -> int:
        return self._wraps

    def sample(self, model: ModelId, request_id: int) -> Metrics:
        records = self._trace.records.get(model.name)
        if not records:
            raise ConfigError(f"trace has no records for model {model.name!r}")
        i = self._cursor[model.name]
        if i >= len(records):
            i = 0
            self._wraps += 1
        self._cursor[model.name] = i + 1
        return records[i]


def load_metric_trace(path) -> MetricTrace:
    records: dict[str, list[Metrics]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
            raise TraceParseError(str(path), 1, f"expected columns {TRACE_COLUMNS}")
        for i, rec in enumerate(reader, start=2):
            try:
                m = Metrics(
                    energy_j=float(rec["energy_j"]),
                    confidence=float(rec["confidence"]),
                    proc_time_s=float(rec["proc_time_s"]),
                    detections=int(rec["detections"]),
                )
            except ValueError as exc:
                raise TraceParseError(str(path), i, str(exc)) from exc
            if m.energy_j < 0 or not 0 <= m.confidence <= 1 or m.proc_time_s < 0:
                raise TraceParseError(str(path), i, f"metric out of range: {m}")
            records.setdefault(rec["model"], []).append(m)
    if not records:
        raise TraceParseError(str(path), 1, "no trace records found")
    return MetricTrace(records=records)


def export_metric_trace(trace: MetricTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for name in trace.models():
            for m in trace.records[name]:
                w.writerow([name, repr(m.energy_j), repr(m.confidence), repr(m.proc_time_s), m.detections])


@dataclass(frozen=True)
class CalibrationTarget:
    """Requested steady-state behavior for one model variant."""

    name: str
    c_avg: float
    e_avg: float
    t_avg: float = 0.02
    detections: tuple[int, int] = (0, 12)


@dataclass(frozen=True)
class SigmaPolicy:
    """Spread parameters used when calibrating profiles from targets.

    sigma_c is an absolute confidence spread; rel_sigma_e scales each
    model's energy spread relative to its target mean and may be given
    per model (sequence aligned with the targets) or as one scalar.
    rel_sigma_t does the same for processing time.
    """

    sigma_c: float = 0.12
    rel_sigma_e: float | Sequence[float] = 0.25
    rel_sigma_t: float = 0.15

    def sigma_e_for(self, position: int, e_target: float) -> float:
        rel = self.rel_sigma_e
        if not isinstance(rel, (int, float)):
            if position >= len(rel):
                raise CalibrationError(
                    f"rel_sigma_e has {len(rel)} entries but target #{position + 1} needs one"
                )
            rel = rel[position]
        return float(rel) * e_target


def calibrate_profiles(
    targets: Sequence[CalibrationTarget], sigma_policy: SigmaPolicy | None = None
) -> list[ModelProfile]:
    """Build profiles whose long-run sample means hit the given targets.

    Confidence lives in [0, 1] and energy in [0, inf), so both location
    parameters are solved against the truncated mean rather than taken
    from the targets directly.
    """
    if not targets:
        raise ConfigError("no calibration targets given")
    policy = sigma_policy or SigmaPolicy()
    profiles = []
    for pos, t in enumerate(targets):
        if not 0.0 < t.c_avg < 1.0:
            raise CalibrationError(f"confidence target must be in (0, 1), got {t.c_avg}")
        if t.e_avg <= 0.0:
            raise CalibrationError(f"energy target must be > 0, got {t.e_avg}")
        if t.t_avg <= 0.0:
            raise CalibrationError(f"processing-time target must be > 0, got {t.t_avg}")
        sigma_e = policy.sigma_e_for(pos, t.e_avg)
        sigma_t = policy.rel_sigma_t * t.t_avg
        profiles.append(
            ModelProfile(
                model=ModelId(index=pos + 1, name=t.name),
                energy=TruncatedNormal(
                    solve_location(t.e_avg, sigma_e, 0.0, math.inf), sigma_e, 0.0, math.inf
                ),
                confidence=TruncatedNormal(
                    solve_location(t.c_avg, policy.sigma_c, 0.0, 1.0), policy.sigma_c, 0.0, 1.0
                ),
                proc_time=TruncatedNormal(
                    solve_location(t.t_avg, sigma_t, 0.0, math.inf), sigma_t, 0.0, math.inf
                ),
                detections=t.detections,
            )
        )
    return profiles
