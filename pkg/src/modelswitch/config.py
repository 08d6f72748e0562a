"""Experiment configuration: file format, defaults, seed splitting.

Configuration is one INI-style key-value file.  Every section is
optional; anything omitted falls back to the defaults below, including
the bundled four-tier model family (nano/small/medium/large) whose
profiles are calibrated so long-run sample means land on the reference
operating points.

Seed policy: the experiment seed is never used directly.  Each
component derives its own sub-seed from (seed, label), so adding one
more policy to a comparison cannot perturb the sample streams of the
others.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .knowledge import ModelId
from .mapek import PhaseCostModel
from .profiles import (
    CalibrationTarget,
    ModelProfile,
    SigmaPolicy,
    TruncatedNormal,
    calibrate_profiles,
)

DEFAULT_SEED = 42
DEFAULT_OUT = "out"
DEFAULT_POLICY = "ecomls"
DEFAULT_EPSILON = 0.1
DEFAULT_EPSILONS = (0.1, 0.2, 0.3, 0.4)
DEFAULT_K = 10
DEFAULT_CADENCE = "per_request"
DEFAULT_EVAL_REQUESTS = 500
DEFAULT_SYNTHETIC_N = 25000
DEFAULT_RATE = 10.0

# Reference operating points for the bundled detector tiers:
# (name, mean confidence, mean energy in J, mean model time in s, detections).
TIER_TARGETS = (
    ("nano", 0.536, 1.61, 0.008, (0, 8)),
    ("small", 0.611, 4.327, 0.015, (0, 10)),
    ("medium", 0.652, 8.918, 0.030, (0, 12)),
    ("large", 0.675, 17.705, 0.060, (0, 14)),
)

# Per-tier relative energy spread.  The cheap tier runs tight; the mid
# tiers wobble hard under load, which skews their offline energy bounds
# upward relative to typical runtime draws and is what gives the
# controller room to dwell on them.
DEFAULT_SIGMA_POLICY = SigmaPolicy(sigma_c=0.12, rel_sigma_e=(0.25, 0.65, 0.40, 0.35))


def derive_seed(master: int, *labels: str) -> int:
    """Stable 63-bit sub-seed for one component of an experiment."""
    text = ":".join([str(master), *labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def default_profiles() -> list[ModelProfile]:
    targets = [
        CalibrationTarget(name=n, c_avg=c, e_avg=e, t_avg=t, detections=d)
        for n, c, e, t, d in TIER_TARGETS
    ]
    return calibrate_profiles(targets, DEFAULT_SIGMA_POLICY)


@dataclass
class ExperimentConfig:
    """Validated experiment description; see load_config for the file form."""

    seed: int = DEFAULT_SEED
    out_dir: str = DEFAULT_OUT
    policy: str = DEFAULT_POLICY
    epsilon: float = DEFAULT_EPSILON
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    k: int = DEFAULT_K
    cadence: str = DEFAULT_CADENCE
    initial_model: str | None = None
    eval_requests: int = DEFAULT_EVAL_REQUESTS
    synthetic_n: int = DEFAULT_SYNTHETIC_N
    rate: float = DEFAULT_RATE
    arrival_trace: str | None = None
    queue_capacity: int | None = None
    phase_costs: PhaseCostModel = field(default_factory=PhaseCostModel)
    profiles: list[ModelProfile] = field(default_factory=default_profiles)
    metric_trace: str | None = None
    base_rules: str | None = None
    drift_at: int | None = None
    drift_profiles: list[ModelProfile] | None = None
    plots: bool = True

    def validate(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")
        for eps in self.epsilons:
            if not 0.0 <= eps <= 1.0:
                raise ConfigError(f"sweep epsilon must be in [0, 1], got {eps}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.cadence not in ("per_request", "per_second"):
            raise ConfigError(f"cadence must be per_request or per_second, got {self.cadence!r}")
        if self.eval_requests < 1:
            raise ConfigError("eval_requests must be >= 1")
        if self.synthetic_n < 1:
            raise ConfigError("synthetic_n must be >= 1")
        if self.rate <= 0:
            raise ConfigError("rate must be > 0")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if not self.profiles:
            raise ConfigError("at least one model profile is required")
        for path in (self.arrival_trace, self.metric_trace, self.base_rules):
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"referenced file does not exist: {path}")
        names = [p.model.name for p in self.profiles]
        if len(set(names)) != len(names):
            raise ConfigError("model names must be unique")
        if self.initial_model is not None and self.initial_model not in names:
            raise ConfigError(
                f"initial_model {self.initial_model!r} is not one of {names}"
            )
        if self.drift_at is not None and self.drift_at < 0:
            raise ConfigError("drift at_request must be >= 0")

    def model_ids(self) -> list[ModelId]:
        return [p.model for p in self.profiles]

    def resolve_initial_model(self) -> ModelId:
        """Configured start model; defaults to the highest tier."""
        ids = self.model_ids()
        if self.initial_model is None:
            return ids[-1]
        for m in ids:
            if m.name == self.initial_model:
                return m
        raise ConfigError(f"initial_model {self.initial_model!r} not found")

    def model_by_name(self, name: str) -> ModelId:
        for m in self.model_ids():
            if m.name == name:
                return m
        raise ConfigError(f"unknown model name {name!r}")


_EXPERIMENT_KEYS = {
    "seed",
    "out",
    "policy",
    "epsilon",
    "epsilons",
    "k",
    "cadence",
    "initial_model",
    "eval_requests",
    "plots",
    "base_rules",
}
_WORKLOAD_KEYS = {"synthetic_n", "rate", "arrival_trace", "queue_capacity"}
_PHASE_KEYS = {"monitor", "analyzer", "planner", "executor"}
_MODEL_KEYS = {"name", "mu_e", "sigma_e", "mu_c", "sigma_c", "mu_t", "sigma_t", "b_lo", "b_hi"}


def _parse_number(section: str, key: str, raw: str, cast):
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: not a valid {cast.__name__}: {raw!r}") from exc


def _profile_from_section(parser, section: str, index: int) -> ModelProfile:
    keys = set(parser[section])
    unknown = keys - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    missing = _MODEL_KEYS - keys
    if missing:
        raise ConfigError(f"[{section}] missing keys: {sorted(missing)}")
    get = parser[section].get
    name = get("name")
    num = lambda key, cast=float: _parse_number(section, key, get(key), cast)
    return ModelProfile(
        model=ModelId(index=index, name=name),
        energy=TruncatedNormal(num("mu_e"), num("sigma_e"), 0.0, math.inf),
        confidence=TruncatedNormal(num("mu_c"), num("sigma_c"), 0.0, 1.0),
        proc_time=TruncatedNormal(num("mu_t"), num("sigma_t"), 0.0, math.inf),
        detections=(num("b_lo", int), num("b_hi", int)),
    )


def _model_sections(parser, prefix: str) -> list[str]:
    found = []
    for section in parser.sections():
        if section.startswith(prefix):
            suffix = section[len(prefix):]
            if not suffix.isdigit():
                raise ConfigError(f"bad model section name [{section}]; use [{prefix}<index>]")
            found.append((int(suffix), section))
    found.sort()
    indices = [i for i, _ in found]
    if indices and indices != list(range(1, len(indices) + 1)):
        raise ConfigError(f"{prefix}* sections must be numbered 1..n, got {indices}")
    return [s for _, s in found]


def load_config(path: str | None = None) -> ExperimentConfig:
    """Read an experiment file, or return pure defaults when path is None."""
    cfg = ExperimentConfig()
    if path is None:
        cfg.validate()
        return cfg
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    known = {"experiment", "workload", "phase_costs", "metric_trace", "drift"}
    for section in parser.sections():
        if section in known or section.startswith("model.") or section.startswith("drift.model."):
            continue
        raise ConfigError(f"unknown config section [{section}]")

    if parser.has_section("experiment"):
        sec = parser["experiment"]
        unknown = set(sec) - _EXPERIMENT_KEYS
        if unknown:
            raise ConfigError(f"[experiment] unknown keys: {sorted(unknown)}")
        if "seed" in sec:
            cfg.seed = _parse_number("experiment", "seed", sec["seed"], int)
        if "out" in sec:
            cfg.out_dir = sec["out"]
        if "policy" in sec:
            cfg.policy = sec["policy"]
        if "epsilon" in sec:
            cfg.epsilon = _parse_number("experiment", "epsilon", sec["epsilon"], float)
        if "epsilons" in sec:
            parts = [p for p in sec["epsilons"].replace(",", " ").split() if p]
            cfg.epsilons = tuple(
                _parse_number("experiment", "epsilons", p, float) for p in parts
            )
        if "k" in sec:
            cfg.k = _parse_number("experiment", "k", sec["k"], int)
        if "cadence" in sec:
            cfg.cadence = sec["cadence"]
        if "initial_model" in sec:
            cfg.initial_model = sec["initial_model"]
        if "eval_requests" in sec:
            cfg.eval_requests = _parse_number(
                "experiment", "eval_requests", sec["eval_requests"], int
            )
        if "plots" in sec:
            try:
                cfg.plots = sec.getboolean("plots")
            except ValueError as exc:
                raise ConfigError(f"[experiment] plots: not a boolean: {sec['plots']!r}") from exc
        if "base_rules" in sec:
            cfg.base_rules = sec["base_rules"]

    if parser.has_section("workload"):
        sec = parser["workload"]
        unknown = set(sec) - _WORKLOAD_KEYS
        if unknown:
            raise ConfigError(f"[workload] unknown keys: {sorted(unknown)}")
        if "synthetic_n" in sec:
            cfg.synthetic_n = _parse_number("workload", "synthetic_n", sec["synthetic_n"], int)
        if "rate" in sec:
            cfg.rate = _parse_number("workload", "rate", sec["rate"], float)
        if "arrival_trace" in sec:
            cfg.arrival_trace = sec["arrival_trace"]
        if "queue_capacity" in sec:
            cfg.queue_capacity = _parse_number(
                "workload", "queue_capacity", sec["queue_capacity"], int
            )

    if parser.has_section("phase_costs"):
        sec = parser["phase_costs"]
        unknown = set(sec) - _PHASE_KEYS
        if unknown:
            raise ConfigError(f"[phase_costs] unknown keys: {sorted(unknown)}")
        values = {}
        for key in _PHASE_KEYS:
            if key in sec:
                values[f"{key}_j"] = _parse_number("phase_costs", key, sec[key], float)
        cfg.phase_costs = PhaseCostModel(**values)

    model_sections = _model_sections(parser, "model.")
    if model_sections:
        cfg.profiles = [
            _profile_from_section(parser, section, i + 1)
            for i, section in enumerate(model_sections)
        ]

    if parser.has_section("metric_trace"):
        sec = parser["metric_trace"]
        if set(sec) != {"path"}:
            raise ConfigError("[metric_trace] takes exactly one key: path")
        cfg.metric_trace = sec["path"]

    if parser.has_section("drift"):
        sec = parser["drift"]
        if set(sec) != {"at_request"}:
            raise ConfigError("[drift] takes exactly one key: at_request")
        cfg.drift_at = _parse_number("drift", "at_request", sec["at_request"], int)
        cfg.drift_profiles = _drift_profiles(parser, cfg.profiles)
    elif _model_sections(parser, "drift.model."):
        raise ConfigError("drift.model.* sections require a [drift] section")

    cfg.validate()
    return cfg


def _drift_profiles(parser, base: list[ModelProfile]) -> list[ModelProfile]:
    """Post-drift profile set: base profiles with per-model overrides."""
    shifted = {p.model.index: p for p in base}
    for section in _model_sections(parser, "drift.model."):
        index = int(section.rsplit(".", 1)[-1])
        if index not in shifted:
            raise ConfigError(f"[{section}] has no matching base model")
        keys = set(parser[section])
        unknown = keys - (_MODEL_KEYS - {"name"})
        if unknown:
            raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
        p = shifted[index]
        get = parser[section].get
        num = lambda key, cast=float: _parse_number(section, key, get(key), cast)
        energy = TruncatedNormal(
            num("mu_e") if "mu_e" in keys else p.energy.mean,
            num("sigma_e") if "sigma_e" in keys else p.energy.sd,
            0.0,
            math.inf,
        )
        confidence = TruncatedNormal(
            num("mu_c") if "mu_c" in keys else p.confidence.mean,
            num("sigma_c") if "sigma_c" in keys else p.confidence.sd,
            0.0,
            1.0,
        )
        proc = TruncatedNormal(
            num("mu_t") if "mu_t" in keys else p.proc_time.mean,
            num("sigma_t") if "sigma_t" in keys else p.proc_time.sd,
            0.0,
            math.inf,
        )
        det = (
            num("b_lo", int) if "b_lo" in keys else p.detections[0],
            num("b_hi", int) if "b_hi" in keys else p.detections[1],
        )
        shifted[index] = ModelProfile(
            model=p.model, energy=energy, confidence=confidence, proc_time=proc, detections=det
        )
    return [shifted[i] for i in sorted(shifted)]
