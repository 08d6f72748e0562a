"""Single-server simulation loop driving the control loop.

Requests are served strictly in arrival order by one server: a request
starts at max(its arrival, the previous completion) and occupies the
server for its sampled model processing time.  System time is therefore
queueing delay plus model time.  After each processed request the
controller monitors, and - per the configured cadence - analyzes, plans
and executes, so a switch takes effect from the next request onward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ConfigError
from .knowledge import (
    BaseRuleRow,
    LogRepository,
    ModelId,
    RequestLogEntry,
)
from .mapek import (
    ControllerState,
    PhaseCostModel,
    PhaseTotals,
    PlannerConfig,
    Policy,
    SwitchEvent,
    SyntheticCostMeter,
    analyzer_tick,
    execute,
    monitor_step,
)
from .profiles import MetricSampler
from .workload import ArrivalTrace, RequestQueue

CADENCE_PER_REQUEST = "per_request"
CADENCE_PER_SECOND = "per_second"
CADENCES = (CADENCE_PER_REQUEST, CADENCE_PER_SECOND)


@dataclass(frozen=True)
class EngineConfig:
    k: int = 10
    cadence: str = CADENCE_PER_REQUEST
    queue_capacity: int | None = None
    phase_costs: PhaseCostModel = field(default_factory=PhaseCostModel)
    planner_seed: int = 0

    def __post_init__(self) -> None:
        if self.cadence not in CADENCES:
            raise ConfigError(f"cadence must be one of {CADENCES}, got {self.cadence!r}")
        if self.k < 1:
            raise ConfigError(f"window size k must be >= 1, got {self.k}")


RuleRowValues = tuple[str, float, float, float, float]


@dataclass
class RunResult:
    """Everything one run produced, before report aggregation."""

    log: LogRepository
    phases: PhaseTotals
    switch_count: int
    switch_events: list[SwitchEvent]
    ticks: int
    wrap_count: int
    drop_count: int
    cadence: str
    final_rules: list[RuleRowValues]
    rule_snapshots: dict[int, list[RuleRowValues]]


class SimulationEngine:
    """Runs one policy over one workload with one metric sampler."""

    def __init__(
        self,
        sampler: MetricSampler,
        base_rules: Sequence[BaseRuleRow],
        policy: Policy,
        arrivals: ArrivalTrace,
        initial_model: ModelId,
        config: EngineConfig | None = None,
        snapshot_after: Iterable[int] = (),
    ) -> None:
        self.sampler = sampler
        self.base_rules = list(base_rules)
        self.policy = policy
        self.arrivals = arrivals
        self.config = config or EngineConfig()
        self.snapshot_after = frozenset(snapshot_after)
        if policy.adapts:
            self.initial_model = initial_model
        else:
            if policy.fixed_model is None:
                raise ConfigError("non-adaptive policy needs a fixed model")
            self.initial_model = policy.fixed_model

    def run(self) -> RunResult:
        cfg = self.config
        repo = LogRepository()
        state = ControllerState(
            base_rules=self.base_rules,
            k=cfg.k,
            initial_model=self.initial_model,
            planner_cfg=PlannerConfig(epsilon=self.policy.epsilon, rng_seed=cfg.planner_seed),
            meter=SyntheticCostMeter(cfg.phase_costs),
        )
        queue = RequestQueue(cfg.queue_capacity)
        adapts = self.policy.adapts
        per_second = cfg.cadence == CADENCE_PER_SECOND
        next_tick_time = 1.0
        busy_until = 0.0
        processed = 0
        snapshots: dict[int, list[RuleRowValues]] = {}

        def process(rid: int, arrival: float, start: float) -> float:
            nonlocal processed, next_tick_time
            model = state.current_model
            m = self.sampler.sample(model, rid)
            completion = start + m.proc_time_s
            # wait + proc keeps system >= model time exact in float math
            wait = start - arrival
            entry = RequestLogEntry(
                request_id=rid,
                arrival_time=arrival,
                model=model,
                energy_j=m.energy_j,
                confidence=m.confidence,
                model_proc_time_s=m.proc_time_s,
                system_proc_time_s=wait + m.proc_time_s,
                detections=m.detections,
            )
            if adapts:
                monitor_step(state, entry, repo)
                due = True
                if per_second:
                    due = completion >= next_tick_time
                    if due:
                        next_tick_time = float(int(completion)) + 1.0
                if due:
                    action = analyzer_tick(state, self.policy)
                    execute(state, action, tick=state.tick_count, virtual_time=completion)
            else:
                repo.append(entry)
            processed += 1
            if processed in self.snapshot_after:
                snapshots[processed] = _rule_values(state)
            return completion

        for rid, t in enumerate(self.arrivals.times):
            # serve everything that starts no later than this arrival
            while not queue.empty():
                jid, jt = queue.peek()
                start = max(jt, busy_until)
                if start > t:
                    break
                queue.take()
                busy_until = process(jid, jt, start)
            queue.offer(rid, t)
        while not queue.empty():
            jid, jt = queue.take()
            start = max(jt, busy_until)
            busy_until = process(jid, jt, start)

        return RunResult(
            log=repo,
            phases=state.phase,
            switch_count=state.switch_count,
            switch_events=list(state.switch_events),
            ticks=state.tick_count,
            wrap_count=self.sampler.wrap_count,
            drop_count=queue.dropped,
            cadence=cfg.cadence,
            final_rules=_rule_values(state),
            rule_snapshots=snapshots,
        )


def _rule_values(state: ControllerState) -> list[RuleRowValues]:
    return [
        (r.model.name, r.e_min, r.e_max, r.e_latest, r.c_avg) for r in state.runtime_rules
    ]
