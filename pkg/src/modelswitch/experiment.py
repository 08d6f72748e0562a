"""End-to-end experiment orchestration shared by the CLI and tests.

A run is always the same pipeline: derive sub-seeds, build (or load)
the base rule table, build the workload, run one policy per approach
through the simulation engine, then summarize and write artifacts.
The comparison matrix mirrors the standard evaluation: every model
pinned standalone, the adaptive policy at each sweep epsilon, and the
three naive update schemes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Sequence

from .config import ExperimentConfig, derive_seed
from .engine import EngineConfig, RunResult, SimulationEngine
from .errors import ConfigError
from .knowledge import (
    BaseRuleRow,
    ModelId,
    export_base_rules_csv,
    load_base_rules_csv,
)
from .learning import (
    EvaluationDataset,
    PerformanceMatrix,
    PerformanceRecord,
    aggregate_rules,
    build_base_rules,
)
from .mapek import Policy, baseline_policy
from .profiles import (
    DriftSampler,
    MetricSampler,
    ProfileSampler,
    TraceSampler,
    load_metric_trace,
)
from .report import (
    RunReport,
    export_histogram_csv,
    export_points_csv,
    export_report_json,
    export_reference_line_csv,
    export_summary_csv,
    export_timeline_csv,
    summarize,
)
from .workload import ArrivalTrace, load_arrival_trace, synth_arrivals


@dataclass
class ExperimentSetup:
    """Shared, policy-independent pieces of one experiment."""

    models: list[ModelId]
    base_rules: list[BaseRuleRow]
    matrices: list[PerformanceMatrix]
    arrivals: ArrivalTrace
    sampler_factory: Callable[[], MetricSampler]
    initial_model: ModelId


def parse_policy_spec(spec: str, models: Sequence[ModelId], epsilon: float) -> Policy:
    """Turn a CLI/config policy string into a Policy.

    Accepted forms: 'ecomls', 'naive1', 'naive2', 'naive3' and
    'no_switch:<model-name>'.
    """
    if spec.startswith("no_switch"):
        _, sep, name = spec.partition(":")
        if not sep or not name:
            raise ConfigError("no_switch policy needs a model, e.g. no_switch:nano")
        for m in models:
            if m.name == name:
                return baseline_policy("no_switch", model=m)
        raise ConfigError(f"no_switch model {name!r} not in {[m.name for m in models]}")
    return baseline_policy(spec, epsilon=epsilon)


def _trace_learning(
    trace_path: str,
) -> tuple[list[ModelId], list[PerformanceMatrix], list[BaseRuleRow]]:
    """Base rules from a recorded metric trace, one matrix per model.

    Trace models are indexed in name order.
    """
    trace = load_metric_trace(trace_path)
    models = [ModelId(index=i + 1, name=n) for i, n in enumerate(trace.models())]
    matrices = []
    rules = []
    for model in models:
        records = tuple(
            PerformanceRecord(
                request_id=i,
                energy_j=m.energy_j,
                confidence=m.confidence,
                proc_time_s=m.proc_time_s,
            )
            for i, m in enumerate(trace.records[model.name])
        )
        matrix = PerformanceMatrix(model_name=model.name, records=records)
        matrices.append(matrix)
        rules.append(aggregate_rules(matrix, model))
    return models, matrices, rules


def prepare(cfg: ExperimentConfig) -> ExperimentSetup:
    """Resolve models, rule table, workload and sampler for one config."""
    cfg.validate()
    inference_seed = derive_seed(cfg.seed, "inference")

    if cfg.metric_trace is not None:
        models, matrices, rules = _trace_learning(cfg.metric_trace)
        trace_path = cfg.metric_trace

        def sampler_factory() -> MetricSampler:
            return TraceSampler(load_metric_trace(trace_path))

    else:
        profiles = cfg.profiles
        models = [p.model for p in profiles]
        if cfg.base_rules is not None:
            rules = load_base_rules_csv(cfg.base_rules)
            if [r.model.name for r in rules] != [m.name for m in models]:
                raise ConfigError(
                    "base rules file models do not match the configured profiles"
                )
            rules = [
                BaseRuleRow(model=m, e_min=r.e_min, e_max=r.e_max, c_avg=r.c_avg)
                for m, r in zip(models, rules)
            ]
            matrices = []
        else:
            dataset = EvaluationDataset.of_size(cfg.eval_requests)
            matrices, rules = build_base_rules(
                profiles, dataset, derive_seed(cfg.seed, "learning")
            )

        if cfg.drift_at is not None and cfg.drift_profiles is not None:
            drift_at = cfg.drift_at
            drift_profiles = cfg.drift_profiles

            def sampler_factory() -> MetricSampler:
                return DriftSampler(
                    before=ProfileSampler(profiles, inference_seed),
                    after=ProfileSampler(drift_profiles, inference_seed),
                    at_request=drift_at,
                )

        else:

            def sampler_factory() -> MetricSampler:
                return ProfileSampler(profiles, inference_seed)

    if cfg.arrival_trace is not None:
        arrivals = load_arrival_trace(cfg.arrival_trace)
    else:
        arrivals = synth_arrivals(cfg.synthetic_n, cfg.rate, derive_seed(cfg.seed, "workload"))

    if cfg.initial_model is not None:
        initial = next(m for m in models if m.name == cfg.initial_model)
    else:
        initial = models[-1]

    return ExperimentSetup(
        models=models,
        base_rules=rules,
        matrices=matrices,
        arrivals=arrivals,
        sampler_factory=sampler_factory,
        initial_model=initial,
    )


def run_policy(
    cfg: ExperimentConfig,
    setup: ExperimentSetup,
    policy: Policy,
    *,
    snapshot_after: Sequence[int] = (),
) -> tuple[RunResult, RunReport]:
    """Run one policy over the shared setup and summarize it."""
    label = policy.label()
    engine = SimulationEngine(
        sampler=setup.sampler_factory(),
        base_rules=setup.base_rules,
        policy=policy,
        arrivals=setup.arrivals,
        initial_model=setup.initial_model,
        config=EngineConfig(
            k=cfg.k,
            cadence=cfg.cadence,
            queue_capacity=cfg.queue_capacity,
            phase_costs=cfg.phase_costs,
            planner_seed=derive_seed(cfg.seed, "planner", label),
        ),
        snapshot_after=snapshot_after,
    )
    result = engine.run()
    report = summarize(
        result.log,
        result.phases,
        result.switch_count,
        label,
        switch_events=result.switch_events,
        cadence=result.cadence,
        ticks=result.ticks,
        wrap_count=result.wrap_count,
        drop_count=result.drop_count,
    )
    return result, report


def compare_policies(cfg: ExperimentConfig, setup: ExperimentSetup) -> list[Policy]:
    """The full approach matrix: standalone tiers, adaptive sweep, naives."""
    policies = [baseline_policy("no_switch", model=m) for m in setup.models]
    policies += [baseline_policy("ecomls", epsilon=eps) for eps in cfg.epsilons]
    policies += [baseline_policy(kind) for kind in ("naive1", "naive2", "naive3")]
    return policies


def write_run_artifacts(
    out_dir: str,
    report: RunReport,
    result: RunResult,
    *,
    plots: bool = True,
) -> str:
    """Write one approach's CSVs, JSON and figures under its own directory."""
    approach_dir = os.path.join(out_dir, report.approach)
    os.makedirs(approach_dir, exist_ok=True)
    result.log.export_csv(os.path.join(approach_dir, "log.csv"))
    export_summary_csv([report], os.path.join(approach_dir, "summary.csv"))
    export_histogram_csv([report], os.path.join(approach_dir, "histogram.csv"))
    export_points_csv(report, os.path.join(approach_dir, "points.csv"))
    export_timeline_csv(report, os.path.join(approach_dir, "switches.csv"))
    export_report_json(report, os.path.join(approach_dir, "report.json"))
    _write_rules_csv(result, os.path.join(approach_dir, "runtime_rules.csv"))
    if plots:
        from . import plots as plotmod

        plotmod.render_run_figures(report, approach_dir)
    return approach_dir


def _write_rules_csv(result: RunResult, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("model", "e_min", "e_max", "e_latest", "c_avg"))
        for name, e_min, e_max, e_latest, c_avg in result.final_rules:
            w.writerow([name, repr(e_min), repr(e_max), repr(e_latest), repr(c_avg)])


def do_learn(cfg: ExperimentConfig) -> list[str]:
    """Evaluate every model offline and write the rule-table artifacts."""
    setup = prepare(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    written = []
    for matrix in setup.matrices:
        path = os.path.join(cfg.out_dir, f"performance_{matrix.model_name}.csv")
        matrix.export_csv(path)
        written.append(path)
    rules_path = os.path.join(cfg.out_dir, "base_rules.csv")
    export_base_rules_csv(setup.base_rules, rules_path)
    written.append(rules_path)
    return written


def do_run(cfg: ExperimentConfig, policy_spec: str | None = None) -> RunReport:
    """Run a single policy and write its artifacts."""
    setup = prepare(cfg)
    policy = parse_policy_spec(policy_spec or cfg.policy, setup.models, cfg.epsilon)
    result, report = run_policy(cfg, setup, policy)
    os.makedirs(cfg.out_dir, exist_ok=True)
    export_base_rules_csv(setup.base_rules, os.path.join(cfg.out_dir, "base_rules.csv"))
    export_summary_csv([report], os.path.join(cfg.out_dir, "summary.csv"))
    export_reference_line_csv(
        [((r.e_min + r.e_max) / 2.0, r.c_avg) for r in setup.base_rules],
        os.path.join(cfg.out_dir, "reference_line.csv"),
    )
    write_run_artifacts(cfg.out_dir, report, result, plots=cfg.plots)
    return report


def do_sweep(cfg: ExperimentConfig) -> list[RunReport]:
    """Run the adaptive policy at every sweep epsilon."""
    setup = prepare(cfg)
    reports = []
    os.makedirs(cfg.out_dir, exist_ok=True)
    for eps in cfg.epsilons:
        policy = baseline_policy("ecomls", epsilon=eps)
        result, report = run_policy(cfg, setup, policy)
        write_run_artifacts(cfg.out_dir, report, result, plots=cfg.plots)
        reports.append(report)
    export_base_rules_csv(setup.base_rules, os.path.join(cfg.out_dir, "base_rules.csv"))
    export_summary_csv(reports, os.path.join(cfg.out_dir, "summary.csv"))
    export_histogram_csv(reports, os.path.join(cfg.out_dir, "histogram.csv"))
    export_reference_line_csv(
        [((r.e_min + r.e_max) / 2.0, r.c_avg) for r in setup.base_rules],
        os.path.join(cfg.out_dir, "reference_line.csv"),
    )
    if cfg.plots:
        from . import plots as plotmod

        plotmod.render_overview_figure(reports, os.path.join(cfg.out_dir, "overview.png"))
    return reports


def do_compare(cfg: ExperimentConfig) -> list[RunReport]:
    """Run the full approach matrix on one shared workload and seed."""
    setup = prepare(cfg)
    reports = []
    os.makedirs(cfg.out_dir, exist_ok=True)
    standalone: list[tuple[float, float]] = []
    for policy in compare_policies(cfg, setup):
        result, report = run_policy(cfg, setup, policy)
        write_run_artifacts(cfg.out_dir, report, result, plots=cfg.plots)
        reports.append(report)
        if policy.kind == "no_switch":
            standalone.append((report.e_avg, report.c_avg))
    export_base_rules_csv(setup.base_rules, os.path.join(cfg.out_dir, "base_rules.csv"))
    export_summary_csv(reports, os.path.join(cfg.out_dir, "summary.csv"))
    export_histogram_csv(reports, os.path.join(cfg.out_dir, "histogram.csv"))
    export_reference_line_csv(standalone, os.path.join(cfg.out_dir, "reference_line.csv"))
    if cfg.plots:
        from . import plots as plotmod

        plotmod.render_overview_figure(reports, os.path.join(cfg.out_dir, "overview.png"))
    return reports
