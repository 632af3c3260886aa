"""Deterministic closed-loop robustness harness for a 2D driving simulator.

Injects deployment-side failures (camera dropout bursts, partial-frame
occlusion, GPS and speedometer noise, control latency) into the
observe-act loop and scores the resulting degradation.
"""

__version__ = "0.1.0"

from loopbench.agents import POLICY_NAMES, make_policy
from loopbench.core import (
    Action,
    EgoState,
    Observation,
    RandomStream,
    SeedTree,
    Tick,
    derive_stream,
    normalize_angle,
    sample_gaussian,
    stop_action,
)
from loopbench.harness import (
    CLEAN_SETTING,
    Setting,
    SweepSpec,
    preset_settings,
    report_from_records,
    run_route,
    run_sweep,
    setting_by_label,
)
from loopbench.latency import ActionBuffer, ticks_from_ms
from loopbench.metrics import (
    DS_PENALTIES,
    PolicyReport,
    RobustnessReport,
    RouteResult,
    SettingRow,
    aggregate,
    comfort,
    driving_score,
    efficiency,
    robustness_degradation,
    summarize_setting,
)
from loopbench.perturb import (
    PRESET_LATENCIES_MS,
    PRESET_PERTURBATIONS,
    ObservationPipeline,
    PerturbationSpec,
)
from loopbench.routes import (
    RouteSpec,
    load_route,
    load_route_suite,
    make_route,
    route_by_id,
    save_route,
)
from loopbench.world import World, WorldParams

__all__ = [
    "Action",
    "ActionBuffer",
    "CLEAN_SETTING",
    "DS_PENALTIES",
    "EgoState",
    "Observation",
    "ObservationPipeline",
    "POLICY_NAMES",
    "PRESET_LATENCIES_MS",
    "PRESET_PERTURBATIONS",
    "PerturbationSpec",
    "PolicyReport",
    "RandomStream",
    "RobustnessReport",
    "RouteResult",
    "RouteSpec",
    "SeedTree",
    "Setting",
    "SettingRow",
    "SweepSpec",
    "Tick",
    "World",
    "WorldParams",
    "aggregate",
    "comfort",
    "derive_stream",
    "driving_score",
    "efficiency",
    "load_route",
    "load_route_suite",
    "make_policy",
    "make_route",
    "normalize_angle",
    "preset_settings",
    "report_from_records",
    "robustness_degradation",
    "route_by_id",
    "run_route",
    "run_sweep",
    "sample_gaussian",
    "save_route",
    "setting_by_label",
    "stop_action",
    "summarize_setting",
    "ticks_from_ms",
]
