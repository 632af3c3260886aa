"""Closed-loop scoring: driving score, success rate, efficiency, comfort,
and the relative-degradation statistic used to compare perturbed runs
against a policy's own clean baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Multiplicative penalty per infraction occurrence, leaderboard-style
# convention. blocked/timeout carry no factor: they cap completion instead.
DS_PENALTIES = {
    "collision_vehicle": 0.60,
    "collision_static": 0.65,
    "red_light": 0.70,
    "route_deviation": 0.70,
}

INFRACTION_KINDS = (
    "collision_vehicle",
    "collision_static",
    "red_light",
    "route_deviation",
    "blocked",
    "timeout",
)

COMFORT_MAX_ACCEL = 3.0  # m/s^2
COMFORT_MAX_JERK = 5.0  # m/s^3
COMFORT_MAX_LAT_ACCEL = 4.0  # m/s^2


@dataclass(frozen=True)
class RouteResult:
    """Outcome of one route rollout."""

    route_id: str
    completion: float  # fraction of route arc-length reached, in [0, 1]
    infractions: tuple[tuple[str, int], ...]  # (kind, tick) pairs
    mean_speed_ratio: float  # mean ego speed / route speed limit
    comfort_fraction: float  # fraction of ticks within comfort envelopes
    outcome: str  # "success" | "failed"
    finish_reason: str  # "completed" | "timeout" | "blocked" | "policy_error"
    ticks_used: int
    time_budget: int
    no_driving: bool = False  # zero driving ticks flag
    diagnostic: str = ""

    def infraction_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for kind, _ in self.infractions:
            counts[kind] = counts.get(kind, 0) + 1
        return counts


def is_success(completion: float, infractions, ticks_used: int,
               time_budget: int) -> bool:
    """Full completion, zero infractions, within the time budget."""
    return (completion >= 1.0 - 1e-9 and len(infractions) == 0
            and ticks_used <= time_budget)


def driving_score(result: RouteResult,
                  penalties: dict[str, float] | None = None) -> float:
    """100 * completion * product of per-infraction penalty factors."""
    table = DS_PENALTIES if penalties is None else penalties
    score = 100.0 * min(1.0, max(0.0, result.completion))
    for kind, count in result.infraction_counts().items():
        factor = table.get(kind)
        if factor is not None:
            score *= factor ** count
    return score


def robustness_degradation(ds_perturbed: float, ds_clean: float) -> float | None:
    """Relative drop from the clean baseline: 1 - perturbed/clean.

    0 means no degradation, 1 complete failure; negative values mean the
    perturbation helped. A zero/negative clean score makes the statistic
    undefined and returns None rather than raising.
    """
    if ds_clean <= 0.0:
        return None
    return 1.0 - ds_perturbed / ds_clean


def efficiency(result: RouteResult) -> float:
    """100 * mean(ego speed / reference speed) over driving ticks."""
    if result.no_driving:
        return 0.0
    return 100.0 * result.mean_speed_ratio


def comfort(result: RouteResult) -> float:
    """100 * fraction of ticks within the accel/jerk/lateral envelopes."""
    if result.no_driving:
        return 0.0
    return 100.0 * result.comfort_fraction


def comfort_fraction_from_series(speeds, headings, dt: float,
                                 max_accel: float = COMFORT_MAX_ACCEL,
                                 max_jerk: float = COMFORT_MAX_JERK,
                                 max_lat_accel: float = COMFORT_MAX_LAT_ACCEL) -> float:
    """Tick-wise comfort compliance from logged speed/heading series.

    Acceleration is the backward difference of speed, jerk the backward
    difference of acceleration (zero for the first interval), and lateral
    acceleration speed times yaw rate.
    """
    n = len(speeds)
    if n < 2:
        return 1.0
    compliant = 0
    prev_accel = None
    for t in range(1, n):
        accel = (speeds[t] - speeds[t - 1]) / dt
        jerk = 0.0 if prev_accel is None else (accel - prev_accel) / dt
        dh = heading_diff(headings[t], headings[t - 1])
        lat = speeds[t] * dh / dt
        ok = (abs(accel) <= max_accel and abs(jerk) <= max_jerk
              and abs(lat) <= max_lat_accel)
        compliant += 1 if ok else 0
        prev_accel = accel
    return compliant / (n - 1)


def heading_diff(a: float, b: float) -> float:
    """Smallest signed difference a - b between two angles."""
    d = math.fmod(a - b, 2.0 * math.pi)
    if d <= -math.pi:
        d += 2.0 * math.pi
    elif d > math.pi:
        d -= 2.0 * math.pi
    return d


@dataclass(frozen=True)
class SettingRow:
    """Aggregated metrics for one (policy, setting) cell of a report."""

    label: str
    is_latency: bool
    rd: float | None
    ds: float
    sr: float
    eff: float
    comf: float
    n_routes: int = 0
    completed: bool = True


def summarize_setting(label: str, is_latency: bool,
                      results: list[RouteResult],
                      ds_clean: float | None,
                      completed: bool = True) -> SettingRow:
    """Route-mean metrics for one setting; RD against the clean baseline."""
    n = len(results)
    if n == 0:
        return SettingRow(label, is_latency, None, 0.0, 0.0, 0.0, 0.0, 0, False)
    ds = sum(driving_score(r) for r in results) / n
    sr = 100.0 * sum(1 for r in results if r.outcome == "success") / n
    eff = sum(efficiency(r) for r in results) / n
    comf = sum(comfort(r) for r in results) / n
    rd = None if ds_clean is None else robustness_degradation(ds, ds_clean)
    return SettingRow(label, is_latency, rd, ds, sr, eff, comf, n, completed)


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _aggregate_rows(label: str, rows: list[SettingRow]) -> SettingRow:
    rds = [r.rd for r in rows if r.rd is not None]
    return SettingRow(
        label=label,
        is_latency=False,
        rd=_mean(rds) if rds else None,
        ds=_mean([r.ds for r in rows]),
        sr=_mean([r.sr for r in rows]),
        eff=_mean([r.eff for r in rows]),
        comf=_mean([r.comf for r in rows]),
        n_routes=sum(r.n_routes for r in rows),
    )


def aggregate(rows: list[SettingRow]) -> dict[str, SettingRow]:
    """Per-column means over completed non-latency, latency, and all rows.

    Baseline rows are not settings and must not be passed in.
    """
    done = [r for r in rows if r.completed]
    out: dict[str, SettingRow] = {}
    perturb = [r for r in done if not r.is_latency]
    lat = [r for r in done if r.is_latency]
    if perturb:
        out["avg_perturb"] = _aggregate_rows("avg_perturb", perturb)
    if lat:
        out["avg_latency"] = _aggregate_rows("avg_latency", lat)
    if done:
        out["avg_all"] = _aggregate_rows("avg_all", done)
    return out


@dataclass
class PolicyReport:
    """All rows for one policy: clean baseline, settings, aggregates."""

    policy: str
    baseline: SettingRow
    rows: list[SettingRow] = field(default_factory=list)
    aggregates: dict[str, SettingRow] = field(default_factory=dict)


@dataclass
class RobustnessReport:
    """Full sweep report across policies."""

    policies: list[PolicyReport] = field(default_factory=list)

    def policy(self, name: str) -> PolicyReport:
        for p in self.policies:
            if p.policy == name:
                return p
        raise KeyError(name)
