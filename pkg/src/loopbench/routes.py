"""Route suite: centerline geometry, scenario events, and the YAML loader.

A route is a 2D polyline with a speed limit, a tick budget, and scripted
scenario events keyed by arc-length triggers. Bundled routes live under
``loopbench/routes/*.yaml`` (schema documented in the README); builders for
the same shapes are exported so tests can construct custom routes directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

ROUTE_SCHEMA_VERSION = 1

EVENT_KINDS = ("lead_vehicle", "red_light", "crossing_actor", "static_prop")


@dataclass(frozen=True)
class RouteEvent:
    """One scripted scenario event, armed at a route arc-length."""

    kind: str
    trigger_s: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {self.kind!r}")


@dataclass(frozen=True)
class RouteSpec:
    route_id: str
    centerline: np.ndarray  # (N, 2) meters, N >= 2
    speed_limit: float  # m/s
    time_budget: int  # ticks
    events: tuple[RouteEvent, ...] = ()

    def __post_init__(self):
        pts = np.asarray(self.centerline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("centerline must be an (N, 2) polyline with N >= 2")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 1e-9):
            raise ValueError("centerline arc-length must be strictly increasing")
        arc = np.concatenate([[0.0], np.cumsum(seg_len)])
        for ev in self.events:
            if not 0.0 <= ev.trigger_s <= arc[-1]:
                raise ValueError(
                    f"event trigger {ev.trigger_s} outside route length {arc[-1]:.1f}")
        object.__setattr__(self, "centerline", pts)
        object.__setattr__(self, "_arc", arc)
        object.__setattr__(self, "_seg_len", seg_len)

    @property
    def length(self) -> float:
        return float(self._arc[-1])

    @property
    def arc(self) -> np.ndarray:
        return self._arc

    def points_at(self, s) -> np.ndarray:
        """Centerline points at arc-lengths s (scalar or array), clamped."""
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        x = np.interp(s, self._arc, self.centerline[:, 0])
        y = np.interp(s, self._arc, self.centerline[:, 1])
        return np.stack([x, y], axis=-1)

    def point_at(self, s: float) -> tuple[float, float]:
        p = self.points_at(float(s))
        return float(p[0]), float(p[1])

    def tangent_at(self, s: float) -> tuple[float, float]:
        """Unit tangent of the segment containing arc-length s."""
        i = int(np.searchsorted(self._arc, min(max(s, 0.0), self.length),
                                side="right") - 1)
        i = min(max(i, 0), len(self._seg_len) - 1)
        dx = self.centerline[i + 1, 0] - self.centerline[i, 0]
        dy = self.centerline[i + 1, 1] - self.centerline[i, 1]
        n = math.hypot(dx, dy)
        return dx / n, dy / n

    def heading_at(self, s: float) -> float:
        tx, ty = self.tangent_at(s)
        return math.atan2(ty, tx)

    def project(self, x: float, y: float, s_hint: float,
                back: float = 6.0, ahead: float = 30.0) -> tuple[float, float]:
        """Localize (x, y) onto the centerline near s_hint.

        Returns (arc-length, signed lateral offset); positive offset is left
        of the travel direction. The search window keeps projection cheap and
        prevents snapping onto far-away parts of the route.
        """
        arc = self._arc
        lo = int(np.searchsorted(arc, s_hint - back, side="right") - 1)
        hi = int(np.searchsorted(arc, s_hint + ahead, side="left"))
        lo = max(lo, 0)
        hi = min(max(hi, lo + 1), len(self._seg_len))
        a = self.centerline[lo:hi]
        b = self.centerline[lo + 1:hi + 1]
        ab = b - a
        seg_len = self._seg_len[lo:hi]
        px = x - a[:, 0]
        py = y - a[:, 1]
        t = np.clip((px * ab[:, 0] + py * ab[:, 1]) / (seg_len ** 2), 0.0, 1.0)
        cx = px - t * ab[:, 0]
        cy = py - t * ab[:, 1]
        d2 = cx ** 2 + cy ** 2
        i = int(np.argmin(d2))
        s = float(arc[lo + i] + t[i] * seg_len[i])
        # perpendicular component, signed by the segment tangent
        lat = float((ab[i, 0] * py[i] - ab[i, 1] * px[i]) / seg_len[i])
        return s, lat


# ---------------------------------------------------------------------------
# geometry builders

def _straight(pts: list, heading: float, dist: float, step: float = 1.0):
    x, y = pts[-1]
    n = max(int(math.ceil(dist / step)), 1)
    for i in range(1, n + 1):
        d = dist * i / n
        pts.append((x + d * math.cos(heading), y + d * math.sin(heading)))
    return heading


def _arc(pts: list, heading: float, radius: float, sweep: float,
         step: float = 1.0):
    """Append a circular arc; positive sweep turns left."""
    x, y = pts[-1]
    side = 1.0 if sweep >= 0 else -1.0
    cx = x - side * radius * math.sin(heading)
    cy = y + side * radius * math.cos(heading)
    arc_len = abs(sweep) * radius
    n = max(int(math.ceil(arc_len / step)), 2)
    for i in range(1, n + 1):
        h = heading + sweep * i / n
        pts.append((cx + side * radius * math.sin(h),
                    cy - side * radius * math.cos(h)))
    return heading + sweep


def build_centerline(segments: list[tuple], step: float = 1.0) -> np.ndarray:
    """Compose a centerline from ("straight", dist) / ("arc", radius, sweep)
    segments, starting at the origin heading +x."""
    pts: list[tuple[float, float]] = [(0.0, 0.0)]
    heading = 0.0
    for seg in segments:
        if seg[0] == "straight":
            heading = _straight(pts, heading, seg[1], step)
        elif seg[0] == "arc":
            heading = _arc(pts, heading, seg[1], seg[2], step)
        else:
            raise ValueError(f"unknown segment kind {seg[0]!r}")
    return np.asarray(pts, dtype=np.float64)


def make_route(route_id: str, segments: list[tuple], speed_limit: float,
               time_budget_s: float, events: list[RouteEvent] = (),
               rate_hz: int = 20) -> RouteSpec:
    return RouteSpec(
        route_id=route_id,
        centerline=build_centerline(segments),
        speed_limit=speed_limit,
        time_budget=int(round(time_budget_s * rate_hz)),
        events=tuple(events),
    )


# ---------------------------------------------------------------------------
# serialization

def route_to_dict(route: RouteSpec, rate_hz: int = 20) -> dict:
    return {
        "schema_version": ROUTE_SCHEMA_VERSION,
        "id": route.route_id,
        "speed_limit": route.speed_limit,
        "time_budget_s": route.time_budget / rate_hz,
        "centerline": [[round(float(x), 3), round(float(y), 3)]
                       for x, y in route.centerline],
        "events": [
            {"kind": ev.kind, "trigger_s": ev.trigger_s, **ev.params}
            for ev in route.events
        ],
    }


def route_from_dict(data: dict, rate_hz: int = 20) -> RouteSpec:
    version = data.get("schema_version")
    if version != ROUTE_SCHEMA_VERSION:
        raise ValueError(f"unsupported route schema_version: {version!r}")
    events = []
    for raw in data.get("events", []):
        raw = dict(raw)
        kind = raw.pop("kind")
        trigger = float(raw.pop("trigger_s"))
        events.append(RouteEvent(kind=kind, trigger_s=trigger, params=raw))
    return RouteSpec(
        route_id=str(data["id"]),
        centerline=np.asarray(data["centerline"], dtype=np.float64),
        speed_limit=float(data["speed_limit"]),
        time_budget=int(round(float(data["time_budget_s"]) * rate_hz)),
        events=tuple(events),
    )


def save_route(route: RouteSpec, path: str | Path, rate_hz: int = 20) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(route_to_dict(route, rate_hz), fh, sort_keys=False,
                       default_flow_style=None)


def load_route(path: str | Path, rate_hz: int = 20) -> RouteSpec:
    with open(path, encoding="utf-8") as fh:
        return route_from_dict(yaml.safe_load(fh), rate_hz)


def bundled_route_dir() -> Path:
    return Path(str(resources.files("loopbench").joinpath("routes")))


def load_route_suite(directory: str | Path | None = None,
                     rate_hz: int = 20) -> list[RouteSpec]:
    """All routes in a directory (bundled suite by default), sorted by id."""
    root = Path(directory) if directory is not None else bundled_route_dir()
    routes = [load_route(p, rate_hz) for p in sorted(root.glob("*.yaml"))]
    if not routes:
        raise FileNotFoundError(f"no route files found under {root}")
    return routes


def route_by_id(route_id: str, directory: str | Path | None = None,
                rate_hz: int = 20) -> RouteSpec:
    for route in load_route_suite(directory, rate_hz):
        if route.route_id == route_id:
            return route
    raise KeyError(route_id)
