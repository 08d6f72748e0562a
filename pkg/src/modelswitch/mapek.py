"""MAPE-K control loop for runtime model switching.

The monitor buffers the last k processed requests, the analyzer compares
the monitored score of the active model against that model's runtime
rule row, and on a trigger the planner either explores (with
probability epsilon) or exploits the rule tables to pick the cheapest
acceptable model.  The executor applies the returned action.

Score semantics: score = energy * (1 - confidence), lower is better.
A cheap, confident model scores near zero; an expensive or unsure one
scores high.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import isfinite
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ValidationError
from .knowledge import (
    BaseRuleRow,
    LogRepository,
    ModelId,
    RequestLogEntry,
    RuntimeRuleRow,
    SlidingWindow,
    init_runtime_rules,
    update_confidence_only,
    update_runtime_rules,
    window_stats,
)

REASON_EXPLORE = "explore"
REASON_ENERGY = "energy_branch"
REASON_CONFIDENCE = "confidence_branch"

PHASES = ("monitor", "analyzer", "planner", "executor")


@dataclass(frozen=True)
class Action:
    """Planner verdict: switch to a target model, or do nothing."""

    target: ModelId | None
    reason: str | None = None

    @property
    def is_switch(self) -> bool:
        return self.target is not None


NO_ADAPT = Action(target=None, reason=None)


@dataclass(frozen=True)
class PlannerConfig:
    """Exploration rate and RNG seed; ties always break to the lowest index."""

    epsilon: float
    rng_seed: int
    tie_break: str = "lowest-index"

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.tie_break != "lowest-index":
            raise ConfigError(f"unsupported tie_break {self.tie_break!r}")


@dataclass(frozen=True)
class PhaseCostModel:
    """Synthetic energy cost (joules) charged per phase invocation.

    Defaults keep the monitor dominant and the other phases near zero,
    matching the relative weight of logging every request versus running
    a handful of float comparisons.  The executor cost applies per
    actual model switch.
    """

    monitor_j: float = 1.2
    analyzer_j: float = 0.001
    planner_j: float = 0.002
    executor_j: float = 0.02

    def __post_init__(self) -> None:
        for name in ("monitor_j", "analyzer_j", "planner_j", "executor_j"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def cost(self, phase: str) -> float:
        return getattr(self, f"{phase}_j")


@dataclass
class PhaseTotals:
    """Accumulated controller energy per phase; totals never decrease."""

    monitor: float = 0.0
    analyzer: float = 0.0
    planner: float = 0.0
    executor: float = 0.0

    def add(self, phase: str, amount: float) -> None:
        if phase not in PHASES:
            raise ValidationError(f"unknown phase {phase!r}")
        if amount < 0:
            raise ValidationError("phase energy increments must be >= 0")
        setattr(self, phase, getattr(self, phase) + amount)

    def total(self) -> float:
        return self.monitor + self.analyzer + self.planner + self.executor


class SyntheticCostMeter:
    """Charges a fixed synthetic cost per phase invocation."""

    def __init__(self, costs: PhaseCostModel | None = None) -> None:
        self.costs = costs or PhaseCostModel()

    def begin(self, phase: str) -> None:
        pass

    def end(self, totals: PhaseTotals, phase: str) -> None:
        totals.add(phase, self.costs.cost(phase))


class WallClockMeter:
    """Charges measured wall-clock time converted at a fixed power draw.

    Useful for profiling the controller itself; not deterministic, so
    reports produced with it are not byte-stable.
    """

    def __init__(self, watts: float = 1.0) -> None:
        if watts <= 0:
            raise ConfigError("watts must be > 0")
        self.watts = watts
        self._t0: dict[str, float] = {}

    def begin(self, phase: str) -> None:
        self._t0[phase] = time.perf_counter()

    def end(self, totals: PhaseTotals, phase: str) -> None:
        t0 = self._t0.pop(phase, None)
        if t0 is None:
            raise ValidationError(f"end({phase!r}) without begin")
        totals.add(phase, (time.perf_counter() - t0) * self.watts)


class RuleSnapshot(NamedTuple):
    """Frozen view of one runtime rule row, taken before tick updates."""

    model: ModelId
    e_mid: float
    e_latest: float
    c_avg: float

    def energy_midpoint(self) -> float:
        return self.e_mid


def snapshot_rules(rows: Sequence[RuntimeRuleRow]) -> list[RuleSnapshot]:
    return [
        RuleSnapshot(r.model, r.energy_midpoint(), r.e_latest, r.c_avg) for r in rows
    ]


def compute_score(energy: float, confidence: float) -> float:
    """energy * (1 - confidence); lower is better."""
    if energy < 0 or not isfinite(energy):
        raise ValidationError(f"energy must be finite and >= 0, got {energy}")
    if not 0.0 <= confidence <= 1.0:
        raise ValidationError(f"confidence must be in [0, 1], got {confidence}")
    return energy * (1.0 - confidence)


def energy_midpoint(row) -> float:
    """Energy reference of a rule row: midpoint of its recorded bounds."""
    return row.energy_midpoint()


def needs_adaptation(e_bar: float, c_bar: float, rule_row) -> bool:
    """Trigger test for the active model.

    Fires only when the monitored score strictly exceeds the score of
    the model's rule row; equality means the system behaves as promised
    and is left alone.
    """
    monitored = compute_score(e_bar, c_bar)
    threshold = compute_score(rule_row.energy_midpoint(), rule_row.c_avg)
    return monitored > threshold


@dataclass(frozen=True)
class SwitchEvent:
    tick: int
    virtual_time_s: float
    from_model: ModelId
    to_model: ModelId
    reason: str


class ControllerState:
    """Mutable state of one control loop instance."""

    def __init__(
        self,
        base_rules: Sequence[BaseRuleRow],
        k: int,
        initial_model: ModelId,
        planner_cfg: PlannerConfig,
        meter: SyntheticCostMeter | WallClockMeter | None = None,
    ) -> None:
        self.runtime_rules = init_runtime_rules(list(base_rules), k)
        for pos, row in enumerate(self.runtime_rules):
            if row.model.index != pos + 1:
                raise ConfigError(
                    f"rule rows must be ordered by contiguous model index, "
                    f"found index {row.model.index} at position {pos}"
                )
        indices = {r.model.index for r in self.runtime_rules}
        if initial_model.index not in indices:
            raise ConfigError(f"initial model {initial_model} not in rule table")
        self.current_model = initial_model
        self.monitor_window = SlidingWindow(k)
        self.planner_cfg = planner_cfg
        self.rng = np.random.default_rng(np.random.SeedSequence([planner_cfg.rng_seed]))
        self.meter = meter or SyntheticCostMeter()
        self.phase = PhaseTotals()
        self.switch_count = 0
        self.switch_events: list[SwitchEvent] = []
        self.tick_count = 0

    def rule_for(self, model: ModelId) -> RuntimeRuleRow:
        return self.runtime_rules[model.index - 1]


@dataclass(frozen=True)
class Policy:
    """How one run treats knowledge updates and exploration.

    update_energy/update_confidence gate the per-tick runtime-rule
    refresh; adapts=False disables the control loop entirely and pins
    fixed_model for the whole run.
    """

    kind: str
    epsilon: float = 0.0
    update_energy: bool = True
    update_confidence: bool = True
    adapts: bool = True
    fixed_model: ModelId | None = None

    def label(self) -> str:
        if self.kind == "no_switch":
            return self.fixed_model.name if self.fixed_model else "no_switch"
        if self.kind == "ecomls":
            return f"ecomls_{self.epsilon:g}"
        return self.kind


def baseline_policy(kind: str, model: ModelId | None = None, epsilon: float = 0.1) -> Policy:
    """Construct one of the named run policies.

    no_switch(m): control loop off, model pinned.
    naive1: rule table frozen at its offline seed; no exploration.
    naive2: only the confidence side of the table tracks the run.
    naive3: full table updates, still no exploration.
    ecomls:  naive3 plus epsilon-greedy exploration.
    """
    if kind == "no_switch":
        if model is None:
            raise ConfigError("no_switch policy requires a model")
        return Policy(
            kind=kind,
            epsilon=0.0,
            update_energy=False,
            update_confidence=False,
            adapts=False,
            fixed_model=model,
        )
    if kind == "naive1":
        return Policy(kind=kind, epsilon=0.0, update_energy=False, update_confidence=False)
    if kind == "naive2":
        return Policy(kind=kind, epsilon=0.0, update_energy=False, update_confidence=True)
    if kind == "naive3":
        return Policy(kind=kind, epsilon=0.0)
    if kind == "ecomls":
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
        return Policy(kind=kind, epsilon=epsilon)
    raise ConfigError(f"unknown policy kind {kind!r}")


def monitor_step(state: ControllerState, entry: RequestLogEntry, repo: LogRepository) -> None:
    """Buffer one processed request and append it to the log."""
    if entry.model != state.current_model:
        raise ValidationError(
            f"monitored entry for {entry.model.name} but current model is "
            f"{state.current_model.name}"
        )
    state.meter.begin("monitor")
    repo.append(entry)
    state.monitor_window.push(entry.energy_j, entry.confidence)
    state.meter.end(state.phase, "monitor")


def plan(
    state: ControllerState,
    e_bar: float,
    c_bar: float,
    cfg: PlannerConfig,
    snapshot: Sequence[RuleSnapshot] | None = None,
) -> Action:
    """Pick the next model given monitored averages and the rule table.

    Explores with probability epsilon (uniform over all models).
    Otherwise each model is scored min(e_mid, e_latest) * (1 - c_avg)
    and the candidate set depends on why the system looks off:

    * energy branch (e_bar above the active row's midpoint): models
      whose midpoint is strictly below e_bar, i.e. cheaper than what we
      are currently paying;
    * confidence branch: models whose running confidence strictly
      exceeds c_bar.

    The lowest-scoring candidate wins, ties break to the lowest index,
    an empty candidate set or picking the active model means no change.
    """
    rows = snapshot if snapshot is not None else snapshot_rules(state.runtime_rules)
    current = state.current_model
    n = len(rows)

    p = float(state.rng.random())
    if p < cfg.epsilon:
        pick = int(state.rng.integers(1, n + 1))
        if pick == current.index:
            return NO_ADAPT
        return Action(target=rows[pick - 1].model, reason=REASON_EXPLORE)

    scores = [min(r.e_mid, r.e_latest) * (1.0 - r.c_avg) for r in rows]
    current_row = rows[current.index - 1]
    if e_bar > current_row.e_mid:
        reason = REASON_ENERGY
        candidates = [i for i in range(n) if rows[i].e_mid < e_bar]
    else:
        reason = REASON_CONFIDENCE
        candidates = [i for i in range(n) if rows[i].c_avg > c_bar]
    if not candidates:
        return NO_ADAPT

    best = candidates[0]
    for i in candidates[1:]:
        if scores[i] < scores[best]:
            best = i
    if rows[best].model == current:
        return NO_ADAPT
    return Action(target=rows[best].model, reason=reason)


def analyzer_tick(state: ControllerState, policy: Policy) -> Action:
    """Run one analyze/plan step against the pre-update rule table.

    Order matters: the rule table is snapshotted, then the active row
    absorbs the newest observation (as the policy allows), then both the
    trigger test and the planner read the snapshot.  Requires at least
    one monitored observation.
    """
    state.tick_count += 1
    state.meter.begin("analyzer")
    snapshot = snapshot_rules(state.runtime_rules)
    energy_obs, conf_obs = state.monitor_window.latest()
    row = state.rule_for(state.current_model)
    if policy.update_energy and policy.update_confidence:
        update_runtime_rules(row, energy_obs, conf_obs)
    elif policy.update_confidence:
        update_confidence_only(row, conf_obs)
    e_bar, c_bar = window_stats(state.monitor_window)
    triggered = needs_adaptation(e_bar, c_bar, snapshot[state.current_model.index - 1])
    state.meter.end(state.phase, "analyzer")
    if not triggered:
        return NO_ADAPT

    state.meter.begin("planner")
    action = plan(state, e_bar, c_bar, state.planner_cfg, snapshot)
    state.meter.end(state.phase, "planner")
    return action


def execute(
    state: ControllerState,
    action: Action,
    *,
    tick: int = 0,
    virtual_time: float = 0.0,
) -> None:
    """Apply a planner action; only a genuine switch changes anything."""
    if not action.is_switch or action.target == state.current_model:
        return
    target = action.target
    if not 1 <= target.index <= len(state.runtime_rules):
        raise ValidationError(f"switch target {target} outside rule table")
    state.meter.begin("executor")
    state.switch_events.append(
        SwitchEvent(
            tick=tick,
            virtual_time_s=virtual_time,
            from_model=state.current_model,
            to_model=target,
            reason=action.reason or "unspecified",
        )
    )
    state.current_model = target
    state.switch_count += 1
    state.meter.end(state.phase, "executor")
