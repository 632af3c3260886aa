"""Closed-loop evaluation protocol: clean baseline first, then matched
perturbed reruns, with full run persistence.

Per tick the wiring is: world -> observe -> observation pipeline -> policy
-> latency buffer -> world.step. Random draws for a route derive from
SeedTree(seed, (route_id,)), never from the policy, so every policy sees
the identical perturbation sequence on a given (route, seed).

Each rollout writes a RunRecord: one JSONL file with a header line, one
line per tick carrying content digests of the clean and perturbed
observations, the fresh and applied actions and the ego pose, and a result
footer. Reruns with --resume reuse any file that already has a footer.
"""

from __future__ import annotations

import base64
import hashlib
import json
import multiprocessing
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

from loopbench import __version__
from loopbench.agents import POLICY_NAMES, make_policy
from loopbench.core import Observation, SeedTree
from loopbench.latency import ActionBuffer, ticks_from_ms
from loopbench.metrics import (
    PolicyReport,
    RobustnessReport,
    RouteResult,
    aggregate,
    comfort_fraction_from_series,
    is_success,
    summarize_setting,
)
from loopbench.perturb import (
    PRESET_LATENCIES_MS,
    PRESET_PERTURBATIONS,
    ObservationPipeline,
    PerturbationSpec,
)
from loopbench.routes import RouteSpec, load_route_suite
from loopbench.world import World, WorldParams

RECORD_SCHEMA = 1


@dataclass(frozen=True)
class Setting:
    """One evaluation condition: a perturbation family (or a composition of
    families as a tuple of specs), a latency level, or the clean baseline."""

    label: str
    perturb: "PerturbationSpec | tuple[PerturbationSpec, ...] | None" = None
    latency_ms: float | None = None
    latency_mode: str = "fixed"

    @property
    def is_latency(self) -> bool:
        return self.latency_ms is not None

    @property
    def is_clean(self) -> bool:
        return self.perturb is None and self.latency_ms is None


CLEAN_SETTING = Setting(label="clean")

# canonical protocol order for the preset grid
PRESET_SETTING_ORDER = (
    "occlusion_0.5", "occlusion_0.8", "burst_1s", "burst_3s",
    "gps_5m", "gps_15m", "speed_mu_0.5", "speed_mu_0.2",
    "latency_100ms", "latency_200ms", "latency_500ms",
)


def preset_settings() -> list[Setting]:
    """Clean baseline plus the full severity grid, in protocol order."""
    out = [CLEAN_SETTING]
    for label in PRESET_SETTING_ORDER:
        if label in PRESET_PERTURBATIONS:
            out.append(Setting(label=label,
                               perturb=PRESET_PERTURBATIONS[label]))
        else:
            out.append(Setting(label=label,
                               latency_ms=PRESET_LATENCIES_MS[label]))
    return out


def setting_by_label(label: str) -> Setting:
    if label in ("clean", "none"):
        return CLEAN_SETTING
    for s in preset_settings():
        if s.label == label:
            return s
    raise KeyError(f"unknown setting label: {label!r}")


@dataclass(frozen=True)
class SweepSpec:
    policies: tuple[str, ...]
    settings: tuple[Setting, ...]
    seed: int = 0
    routes_dir: str | None = None  # bundled suite when None
    out_dir: str | None = None
    sweep_id: str = "sweep"
    params: WorldParams = field(default_factory=WorldParams)
    resume: bool = False
    workers: int = 1
    n_camera_streams: int = 1
    log_rasters: bool = False


# ---------------------------------------------------------------------------
# digests and record I/O

def _perturb_snapshot(perturb) -> list | None:
    """JSON-friendly snapshot of one spec or a composition of specs."""
    if perturb is None:
        return None
    specs = [perturb] if isinstance(perturb, PerturbationSpec) else list(perturb)
    return [{k: list(v) if isinstance(v, tuple) else v
             for k, v in asdict(s).items()} for s in specs]


def observation_digest(obs: Observation) -> str:
    scalars = struct.pack(
        "<7dq", obs.gps[0], obs.gps[1], obs.speed, obs.compass,
        obs.target_point[0], obs.target_point[1], obs.speed_limit, obs.stamp)
    h = hashlib.blake2b(digest_size=8)
    h.update(obs.camera.tobytes())
    h.update(scalars)
    return h.hexdigest()


def _action_fields(action) -> list[float]:
    return [round(action.throttle, 9), round(action.brake, 9),
            round(action.steer, 9), action.created_tick]


def result_to_dict(result: RouteResult) -> dict:
    return {
        "type": "result",
        "route": result.route_id,
        "completion": round(result.completion, 9),
        "infractions": [[k, t] for k, t in result.infractions],
        "mean_speed_ratio": round(result.mean_speed_ratio, 9),
        "comfort_fraction": round(result.comfort_fraction, 9),
        "outcome": result.outcome,
        "finish_reason": result.finish_reason,
        "ticks_used": result.ticks_used,
        "time_budget": result.time_budget,
        "no_driving": result.no_driving,
        "diagnostic": result.diagnostic,
    }


def result_from_dict(data: dict) -> RouteResult:
    return RouteResult(
        route_id=data["route"],
        completion=data["completion"],
        infractions=tuple((k, t) for k, t in data["infractions"]),
        mean_speed_ratio=data["mean_speed_ratio"],
        comfort_fraction=data["comfort_fraction"],
        outcome=data["outcome"],
        finish_reason=data["finish_reason"],
        ticks_used=data["ticks_used"],
        time_budget=data["time_budget"],
        no_driving=data["no_driving"],
        diagnostic=data.get("diagnostic", ""),
    )


def load_cached_result(path: Path) -> RouteResult | None:
    """RouteResult from an existing RunRecord footer, or None."""
    try:
        with open(path, encoding="utf-8") as fh:
            last = None
            for line in fh:
                if line.strip():
                    last = line
        if last is None:
            return None
        data = json.loads(last)
        if data.get("type") != "result":
            return None
        return result_from_dict(data)
    except (OSError, json.JSONDecodeError, KeyError):
        return None


# ---------------------------------------------------------------------------
# single rollout

def run_route(policy_name: str, route: RouteSpec, setting: Setting,
              seed: int, params: WorldParams | None = None,
              out_path: str | Path | None = None, resume: bool = False,
              n_camera_streams: int = 1, latency_trace=None,
              pipeline_absent: bool = False,
              log_rasters: bool = False,
              policy_overrides: dict | None = None) -> RouteResult:
    """Run one policy on one route under one setting.

    ``pipeline_absent`` bypasses pipeline construction entirely (the
    injection-locality reference path). A policy exception marks the route
    failed with a diagnostic instead of aborting the caller.
    """
    params = params or WorldParams()
    if out_path is not None:
        out_path = Path(out_path)
        if resume:
            cached = load_cached_result(out_path)
            if cached is not None:
                return cached
        out_path.parent.mkdir(parents=True, exist_ok=True)

    world = World(route, params)
    policy = make_policy(policy_name, params, **(policy_overrides or {}))
    tree = SeedTree(seed, (route.route_id,))
    if pipeline_absent or setting.perturb is None:
        pipeline = None
    else:
        pipeline = ObservationPipeline(setting.perturb, tree,
                                       n_camera_streams=n_camera_streams)
    if setting.latency_ms is not None:
        delay = ticks_from_ms(setting.latency_ms, params.rate_hz)
        buffer = ActionBuffer(mode=setting.latency_mode, delay_ticks=delay,
                              rate_hz=params.rate_hz)
    else:
        buffer = ActionBuffer(mode="immediate", delay_ticks=0,
                              rate_hz=params.rate_hz)

    lines: list[str] = []
    if out_path is not None:
        header = {
            "type": "header",
            "schema": RECORD_SCHEMA,
            "version": __version__,
            "policy": policy_name,
            "route": route.route_id,
            "setting": setting.label,
            "seed": seed,
            "rate_hz": params.rate_hz,
            "latency_ms": setting.latency_ms,
            "latency_mode": setting.latency_mode
            if setting.latency_ms is not None else None,
            "perturb": _perturb_snapshot(setting.perturb),
            "n_camera_streams": n_camera_streams,
        }
        lines.append(json.dumps(header, sort_keys=True))

    speeds = [world.ego.speed]
    headings = [world.ego.heading]
    diagnostic = ""
    finish_override = None
    n_infr_seen = 0

    while not world.done:
        obs = world.observe()
        if pipeline is None:
            pert_obs, info = obs, {}
        else:
            pert_obs, info = pipeline.apply(obs)
        try:
            fresh = policy.step(pert_obs)
        except Exception as exc:  # policy failure ends the route, not the sweep
            diagnostic = f"policy_error: {type(exc).__name__}: {exc}"
            finish_override = "policy_error"
            break
        if setting.latency_mode == "realtime" and setting.latency_ms is not None:
            if latency_trace:
                measured = latency_trace[world.tick % len(latency_trace)]
            else:
                measured = setting.latency_ms
            applied = buffer.realtime_apply(fresh, measured, world.tick)
        else:
            applied = buffer.push_then_pop(fresh, world.tick)
        tick_index = world.tick
        world.step(applied)
        speeds.append(world.ego.speed)
        headings.append(world.ego.heading)

        if out_path is not None:
            row = {
                "type": "tick",
                "t": tick_index,
                "clean": observation_digest(obs),
                "pert": observation_digest(pert_obs),
                "fresh": _action_fields(fresh),
                "applied": _action_fields(applied),
                "pose": [round(world.ego.x, 9), round(world.ego.y, 9),
                         round(world.ego.heading, 9),
                         round(world.ego.speed, 9)],
            }
            new_infr = world.infractions[n_infr_seen:]
            if new_infr:
                row["infr"] = [[i.kind, i.tick] for i in new_infr]
                n_infr_seen = len(world.infractions)
            if info:
                row["info"] = info
            if log_rasters:
                row["raster"] = base64.b64encode(
                    pert_obs.camera.tobytes()).decode("ascii")
            lines.append(json.dumps(row, sort_keys=True))

    if finish_override is not None:
        finish_reason = finish_override
        completion = world.completion
    else:
        finish_reason = world.finish_reason or "timeout"
        completion = 1.0 if finish_reason == "completed" else world.completion

    infractions = tuple((i.kind, i.tick) for i in world.infractions)
    ticks_used = world.tick
    no_driving = ticks_used == 0
    mean_ratio = 0.0
    if ticks_used > 0:
        mean_ratio = (sum(speeds[1:]) / ticks_used) / route.speed_limit
    comfort_frac = comfort_fraction_from_series(speeds, headings, params.dt)
    outcome = "success" if (finish_reason == "completed" and is_success(
        completion, infractions, ticks_used, route.time_budget)) else "failed"
    result = RouteResult(
        route_id=route.route_id,
        completion=completion,
        infractions=infractions,
        mean_speed_ratio=mean_ratio,
        comfort_fraction=comfort_frac,
        outcome=outcome,
        finish_reason=finish_reason,
        ticks_used=ticks_used,
        time_budget=route.time_budget,
        no_driving=no_driving,
        diagnostic=diagnostic,
    )
    if out_path is not None:
        lines.append(json.dumps(result_to_dict(result), sort_keys=True))
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return result


# ---------------------------------------------------------------------------
# sweeps

def record_path(out_dir: str | Path, sweep_id: str, policy: str,
                setting_label: str, route_id: str) -> Path:
    return (Path(out_dir) / sweep_id / policy / setting_label
            / f"{route_id}.jsonl")


def _run_one(task) -> RouteResult:
    (policy, route, setting, seed, params, out_path, resume,
     n_streams, log_rasters) = task
    return run_route(policy, route, setting, seed, params=params,
                     out_path=out_path, resume=resume,
                     n_camera_streams=n_streams, log_rasters=log_rasters)


def run_setting(spec: SweepSpec, policy: str, setting: Setting,
                routes: list[RouteSpec]) -> list[RouteResult]:
    tasks = []
    for route in routes:
        out_path = None
        if spec.out_dir is not None:
            out_path = record_path(spec.out_dir, spec.sweep_id, policy,
                                   setting.label, route.route_id)
        tasks.append((policy, route, setting, spec.seed, spec.params,
                      out_path, spec.resume, spec.n_camera_streams,
                      spec.log_rasters))
    if spec.workers > 1:
        with multiprocessing.Pool(spec.workers) as pool:
            return pool.map(_run_one, tasks)
    return [_run_one(t) for t in tasks]


def run_sweep(spec: SweepSpec, routes: list[RouteSpec] | None = None,
              progress=None) -> RobustnessReport:
    """Execute clean + all settings for all policies; RD is computed against
    each policy's own clean baseline from this sweep."""
    if routes is None:
        routes = load_route_suite(spec.routes_dir,
                                  rate_hz=spec.params.rate_hz)
    settings = list(spec.settings)
    if not any(s.is_clean for s in settings):
        settings.insert(0, CLEAN_SETTING)
    else:
        settings.sort(key=lambda s: 0 if s.is_clean else 1)

    report = RobustnessReport()
    for policy in spec.policies:
        baseline_row = None
        rows = []
        ds_clean = None
        for setting in settings:
            results = run_setting(spec, policy, setting, routes)
            if progress is not None:
                progress(policy, setting.label, results)
            if setting.is_clean:
                baseline_row = summarize_setting(
                    "clean", False, results, ds_clean=None)
                ds_clean = baseline_row.ds
            else:
                rows.append(summarize_setting(
                    setting.label, setting.is_latency, results, ds_clean))
        policy_report = PolicyReport(policy=policy, baseline=baseline_row,
                                     rows=rows, aggregates=aggregate(rows))
        report.policies.append(policy_report)

    if spec.out_dir is not None:
        from loopbench.report import write_report_files
        write_report_files(report, Path(spec.out_dir) / spec.sweep_id)
    return report


def _read_header(path: Path) -> dict | None:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.loads(fh.readline())
        return data if data.get("type") == "header" else None
    except (OSError, json.JSONDecodeError):
        return None


def report_from_records(sweep_root: str | Path) -> RobustnessReport:
    """Rebuild a RobustnessReport purely from RunRecord footers on disk.

    Expects the run_sweep layout <root>/<policy>/<setting>/<route>.jsonl.
    The clean setting must be present for every policy (RD baseline).
    """
    root = Path(sweep_root)
    policy_dirs = [p for p in root.iterdir() if p.is_dir()] if root.is_dir() else []
    if not policy_dirs:
        raise FileNotFoundError(f"no run records under {root}")

    def policy_key(p: Path):
        known = p.name in POLICY_NAMES
        return (POLICY_NAMES.index(p.name) if known else len(POLICY_NAMES),
                p.name)

    def setting_key(d: Path):
        if d.name == "clean":
            return (0, 0, d.name)
        if d.name in PRESET_SETTING_ORDER:
            return (1, PRESET_SETTING_ORDER.index(d.name), d.name)
        return (2, 0, d.name)

    report = RobustnessReport()
    for pdir in sorted(policy_dirs, key=policy_key):
        setting_dirs = sorted((d for d in pdir.iterdir() if d.is_dir()),
                              key=setting_key)
        baseline_row = None
        ds_clean = None
        rows = []
        for sdir in setting_dirs:
            files = sorted(sdir.glob("*.jsonl"))
            results = []
            for path in files:
                res = load_cached_result(path)
                if res is None:
                    raise ValueError(f"record has no result footer: {path}")
                results.append(res)
            if not results:
                continue
            if sdir.name == "clean":
                baseline_row = summarize_setting("clean", False, results,
                                                 ds_clean=None)
                ds_clean = baseline_row.ds
            else:
                header = _read_header(files[0]) or {}
                is_lat = header.get("latency_ms") is not None
                rows.append(summarize_setting(sdir.name, is_lat, results,
                                              ds_clean))
        if baseline_row is None:
            raise ValueError(f"no clean baseline records under {pdir}")
        report.policies.append(PolicyReport(
            policy=pdir.name, baseline=baseline_row, rows=rows,
            aggregates=aggregate(rows)))
    return report
