"""Deterministic simulator and controller library for runtime ML model switching.

The package simulates a single-server inference service that can swap
between model variants of different size at runtime.  A MAPE-K control
loop watches energy and confidence over a sliding window and switches
models with an epsilon-greedy planner; several baseline policies and a
full evaluation pipeline (offline learning, workload replay, reports,
figures) come along.
"""

from .config import ExperimentConfig, default_profiles, derive_seed, load_config
from .engine import EngineConfig, RunResult, SimulationEngine
from .errors import (
    CalibrationError,
    ConfigError,
    EmptyWindowError,
    ModelSwitchError,
    TraceParseError,
    ValidationError,
)
from .knowledge import (
    BaseRuleRow,
    LogRepository,
    ModelId,
    RequestLogEntry,
    RuntimeRuleRow,
    SlidingWindow,
    init_runtime_rules,
    log_request,
    update_runtime_rules,
    window_stats,
)
from .learning import (
    EvaluationDataset,
    PerformanceMatrix,
    aggregate_rules,
    build_base_rules,
    evaluate_model,
)
from .mapek import (
    NO_ADAPT,
    Action,
    ControllerState,
    PhaseCostModel,
    PlannerConfig,
    Policy,
    analyzer_tick,
    baseline_policy,
    compute_score,
    energy_midpoint,
    execute,
    monitor_step,
    needs_adaptation,
    plan,
)
from .profiles import (
    CalibrationTarget,
    MetricTrace,
    Metrics,
    ModelProfile,
    SigmaPolicy,
    TruncatedNormal,
    calibrate_profiles,
    infer,
)
from .report import RunReport, ScoreHistogram, bin_score, export, summarize
from .workload import ArrivalTrace, RequestQueue, load_arrival_trace, synth_arrivals

__version__ = "0.1.0"
