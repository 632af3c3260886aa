"""Deterministic 2D closed-loop driving world.

Ego kinematics use a bicycle model integrated with the exact constant-input
arc update per tick, so constant steer traces a true circle. Cornering is
grip-limited: commanded curvature saturates at lat_accel_limit / v^2, which
makes overspeed (for example from a speed-reading bias) produce understeer
and route deviation instead of physically free turning.

Scripted scenario actors (lead vehicle, crossing actor, static prop) and
one-shot traffic lights are driven by route events; infractions are
debounced per kind. Camera rendering is a pure function of world state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from loopbench.core import Action, EgoState, Observation
from loopbench.routes import RouteSpec

# raster intensity codes (single channel, float32)
CODE_EMPTY = 0.0
CODE_CORRIDOR = 0.25
CODE_CENTERLINE = 0.5
CODE_GREEN = 0.6
CODE_RED = 0.75
CODE_ACTOR = 1.0


@dataclass(frozen=True)
class WorldParams:
    rate_hz: int = 20
    wheelbase: float = 2.7
    max_accel: float = 3.0  # m/s^2
    max_decel: float = 8.0  # m/s^2
    max_steer: float = 0.5  # rad
    lat_accel_limit: float = 6.0  # m/s^2 cornering grip cap
    ego_half_length: float = 2.0
    ego_half_width: float = 1.0
    corridor_half_width: float = 3.5
    deviation_limit: float = 3.0  # m lateral offset before route_deviation
    blocked_speed: float = 0.1  # m/s
    blocked_window_s: float = 90.0
    debounce_clear_s: float = 2.0
    lookahead_m: float = 8.0
    camera_size: int = 64
    view_range: float = 32.0  # m ahead in the camera
    view_half_width: float = 8.0  # m to each side

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz


@dataclass(frozen=True)
class Infraction:
    kind: str
    tick: int


@dataclass
class ActorView:
    """Pose snapshot of one scripted actor."""

    actor_id: str
    kind: str  # "vehicle" | "walker" | "static"
    x: float
    y: float
    heading: float
    speed: float
    half_length: float
    half_width: float


@dataclass(frozen=True)
class LightView:
    x: float
    y: float
    phase: str  # "red" | "green"
    phase_timer: float  # seconds until the next phase change (inf if none)


@dataclass(frozen=True)
class WorldState:
    tick: int
    ego: EgoState
    actors: tuple
    lights: tuple
    route_progress: float
    infractions: tuple


class _Lead:
    """Lead vehicle that drives the centerline, stops once, then resumes."""

    def __init__(self, route: RouteSpec, trigger_s: float, params: dict,
                 index: int):
        self.route = route
        self.arc = trigger_s
        self.cruise = float(params.get("speed", route.speed_limit * 0.5))
        self.stop_s = float(params.get("stop_s", route.length))
        self.pause_left = float(params.get("pause_s", 6.0))
        self.phase = "drive"
        self.actor = ActorView(f"lead_{index}", "vehicle", 0.0, 0.0, 0.0,
                               self.cruise,
                               float(params.get("half_length", 2.2)),
                               float(params.get("half_width", 0.95)))
        self.active = True
        self._place()

    def _place(self):
        x, y = self.route.point_at(self.arc)
        self.actor.x, self.actor.y = x, y
        self.actor.heading = self.route.heading_at(self.arc)

    def update(self, dt: float, ego_progress: float):
        if not self.active:
            return
        if self.phase == "drive":
            self.arc += self.cruise * dt
            self.actor.speed = self.cruise
            if self.arc >= self.stop_s:
                self.arc = self.stop_s
                self.phase = "pause"
                self.actor.speed = 0.0
        elif self.phase == "pause":
            self.pause_left -= dt
            self.actor.speed = 0.0
            if self.pause_left <= 0.0:
                self.phase = "resume"
        else:
            self.arc += self.cruise * dt
            self.actor.speed = self.cruise
            if self.arc >= self.route.length:
                self.active = False
        self._place()


class _Crossing:
    """Actor crossing the corridor perpendicular to the route, armed when
    the ego reaches trigger_s."""

    def __init__(self, route: RouteSpec, trigger_s: float, params: dict,
                 index: int):
        self.route = route
        self.trigger_s = trigger_s
        self.cross_s = float(params["cross_s"])
        self.lat = float(params.get("start_lat", 10.0))
        self.end_lat = float(params.get("end_lat", -10.0))
        self.speed = float(params.get("speed", 1.6))
        kind = params.get("actor", "walker")
        self.actor = ActorView(f"crossing_{index}", kind, 0.0, 0.0, 0.0,
                               self.speed,
                               float(params.get("half_length", 0.4)),
                               float(params.get("half_width", 0.4)))
        self.active = False
        self.finished = False
        tx, ty = route.tangent_at(self.cross_s)
        self._base = route.point_at(self.cross_s)
        self._normal = (-ty, tx)  # left of travel direction
        sign = 1.0 if self.end_lat >= self.lat else -1.0
        self.actor.heading = math.atan2(sign * self._normal[1],
                                        sign * self._normal[0])
        self._place()

    def _place(self):
        self.actor.x = self._base[0] + self._normal[0] * self.lat
        self.actor.y = self._base[1] + self._normal[1] * self.lat

    def update(self, dt: float, ego_progress: float):
        if self.finished:
            return
        if not self.active:
            if ego_progress >= self.trigger_s:
                self.active = True
            else:
                return
        step = self.speed * dt
        if self.end_lat >= self.lat:
            self.lat = min(self.lat + step, self.end_lat)
        else:
            self.lat = max(self.lat - step, self.end_lat)
        if self.lat == self.end_lat:
            self.active = False
            self.finished = True
        self._place()


class _Static:
    """Immobile prop at a fixed offset from the centerline."""

    def __init__(self, route: RouteSpec, trigger_s: float, params: dict,
                 index: int):
        lat = float(params.get("lat", 0.0))
        tx, ty = route.tangent_at(trigger_s)
        bx, by = route.point_at(trigger_s)
        self.actor = ActorView(f"static_{index}", "static",
                               bx - ty * lat, by + tx * lat,
                               route.heading_at(trigger_s), 0.0,
                               float(params.get("half_length", 1.2)),
                               float(params.get("half_width", 1.2)))
        self.active = True

    def update(self, dt: float, ego_progress: float):
        pass


class _Light:
    """One-shot signal at a stop line: green, red during [red_from, red_to),
    green again after."""

    def __init__(self, route: RouteSpec, trigger_s: float, params: dict):
        self.stop_s = trigger_s
        self.x, self.y = route.point_at(trigger_s)
        self.red_from = float(params["red_from_s"])
        self.red_to = float(params["red_to_s"])

    def phase(self, t_sec: float) -> str:
        return "red" if self.red_from <= t_sec < self.red_to else "green"

    def phase_timer(self, t_sec: float) -> float:
        if t_sec < self.red_from:
            return self.red_from - t_sec
        if t_sec < self.red_to:
            return self.red_to - t_sec
        return math.inf


def _aabb_half_extents(half_length: float, half_width: float,
                       heading: float) -> tuple[float, float]:
    c, s = abs(math.cos(heading)), abs(math.sin(heading))
    return (half_length * c + half_width * s,
            half_length * s + half_width * c)


_DETECTED_KINDS = ("collision_vehicle", "collision_static", "red_light",
                   "route_deviation")


class World:
    """Single-rollout simulator. step() is deterministic in (state, action)."""

    def __init__(self, route: RouteSpec, params: WorldParams | None = None):
        self.route = route
        self.params = params or WorldParams()
        self.tick = 0
        x0, y0 = route.point_at(0.0)
        self.ego = EgoState(x=x0, y=y0, heading=route.heading_at(0.0),
                            speed=0.0, acceleration=0.0, steer_angle=0.0)
        self.route_progress = 0.0
        self.lateral_offset = 0.0
        self.infractions: list[Infraction] = []
        self.finish_reason: str | None = None
        self._armed = {k: True for k in _DETECTED_KINDS}
        self._clear_ticks = {k: 0 for k in _DETECTED_KINDS}
        self._blocked_ticks = 0
        self._scripts = []
        self.lights: list[_Light] = []
        for i, ev in enumerate(route.events):
            if ev.kind == "lead_vehicle":
                self._scripts.append(_Lead(route, ev.trigger_s, ev.params, i))
            elif ev.kind == "crossing_actor":
                self._scripts.append(_Crossing(route, ev.trigger_s, ev.params, i))
            elif ev.kind == "static_prop":
                self._scripts.append(_Static(route, ev.trigger_s, ev.params, i))
            elif ev.kind == "red_light":
                self.lights.append(_Light(route, ev.trigger_s, ev.params))

    # ------------------------------------------------------------------
    @property
    def done(self) -> bool:
        return self.finish_reason is not None

    @property
    def time_sec(self) -> float:
        return self.tick * self.params.dt

    @property
    def completion(self) -> float:
        return min(1.0, self.route_progress / self.route.length)

    def active_actors(self) -> list[ActorView]:
        return [s.actor for s in self._scripts if s.active]

    def snapshot(self) -> WorldState:
        actors = tuple(
            (a.actor_id, a.kind, round(a.x, 9), round(a.y, 9),
             round(a.heading, 9), round(a.speed, 9))
            for a in self.active_actors())
        lights = tuple(
            LightView(l.x, l.y, l.phase(self.time_sec),
                      l.phase_timer(self.time_sec))
            for l in self.lights)
        return WorldState(tick=self.tick, ego=self.ego, actors=actors,
                          lights=lights, route_progress=self.route_progress,
                          infractions=tuple(self.infractions))

    # ------------------------------------------------------------------
    def step(self, action: Action) -> None:
        if self.done:
            return
        p = self.params
        dt = p.dt
        accel_cmd = action.throttle * p.max_accel - action.brake * p.max_decel
        v0 = self.ego.speed
        v1 = max(0.0, v0 + accel_cmd * dt)
        delta = max(-p.max_steer, min(p.max_steer, action.steer * p.max_steer))
        kappa = math.tan(delta) / p.wheelbase
        if v1 > 1e-9:
            cap = p.lat_accel_limit / (v1 * v1)
            kappa = max(-cap, min(cap, kappa))
        omega = v1 * kappa
        th0 = self.ego.heading
        if abs(omega) * dt < 1e-9:
            x = self.ego.x + v1 * dt * math.cos(th0)
            y = self.ego.y + v1 * dt * math.sin(th0)
            th1 = th0
        else:
            radius = v1 / omega
            th1 = th0 + omega * dt
            x = self.ego.x + radius * (math.sin(th1) - math.sin(th0))
            y = self.ego.y - radius * (math.cos(th1) - math.cos(th0))
        self.ego = EgoState(x=x, y=y, heading=th1, speed=v1,
                            acceleration=(v1 - v0) / dt, steer_angle=delta)
        self.tick += 1

        prev_progress = self.route_progress
        s, lat = self.route.project(x, y, prev_progress)
        self.route_progress = max(prev_progress, s)
        self.lateral_offset = lat

        for script in self._scripts:
            script.update(dt, self.route_progress)

        self._detect_infractions(prev_progress)
        self._check_termination(v1)

    # ------------------------------------------------------------------
    def _detect_infractions(self, prev_progress: float) -> None:
        p = self.params
        ego_hx, ego_hy = _aabb_half_extents(p.ego_half_length,
                                            p.ego_half_width,
                                            self.ego.heading)
        hit_vehicle = False
        hit_static = False
        for a in self.active_actors():
            ahx, ahy = _aabb_half_extents(a.half_length, a.half_width,
                                          a.heading)
            if (abs(self.ego.x - a.x) <= ego_hx + ahx
                    and abs(self.ego.y - a.y) <= ego_hy + ahy):
                if a.kind == "static":
                    hit_static = True
                else:
                    hit_vehicle = True
        ran_red = any(
            prev_progress < l.stop_s <= self.route_progress
            and l.phase(self.time_sec) == "red"
            for l in self.lights)
        deviated = abs(self.lateral_offset) > p.deviation_limit
        self._debounce("collision_vehicle", hit_vehicle)
        self._debounce("collision_static", hit_static)
        self._debounce("red_light", ran_red)
        self._debounce("route_deviation", deviated)

    def _debounce(self, kind: str, present: bool) -> None:
        if present:
            if self._armed[kind]:
                self.infractions.append(Infraction(kind, self.tick))
                self._armed[kind] = False
            self._clear_ticks[kind] = 0
        elif not self._armed[kind]:
            self._clear_ticks[kind] += 1
            window = int(self.params.debounce_clear_s * self.params.rate_hz)
            if self._clear_ticks[kind] >= window:
                self._armed[kind] = True
                self._clear_ticks[kind] = 0

    def _check_termination(self, speed: float) -> None:
        p = self.params
        if self.route_progress >= self.route.length - 1e-9:
            self.finish_reason = "completed"
            return
        if self.tick > self.route.time_budget:
            self.infractions.append(Infraction("timeout", self.tick))
            self.finish_reason = "timeout"
            return
        if speed < p.blocked_speed:
            self._blocked_ticks += 1
            if self._blocked_ticks > p.blocked_window_s * p.rate_hz:
                self.infractions.append(Infraction("blocked", self.tick))
                self.finish_reason = "blocked"
        else:
            self._blocked_ticks = 0

    # ------------------------------------------------------------------
    def render_camera(self) -> np.ndarray:
        """Ego-centric forward view, shape (size, size) float32.

        Rows map to forward distance (bottom row = ego position, top row =
        view_range ahead); columns map to lateral offset, left of the ego at
        high column indices. Pure function of world state.
        """
        p = self.params
        H = W = p.camera_size
        raster = np.zeros((H, W), dtype=np.float32)
        ego = self.ego
        cos_h = math.cos(ego.heading)
        sin_h = math.sin(ego.heading)

        s_lo = max(0.0, self.route_progress - 4.0)
        s_hi = min(self.route.length, self.route_progress + p.view_range * 1.4)
        ss = np.arange(s_lo, s_hi + 1e-6, 0.5)
        if len(ss) >= 2:
            pts = self.route.points_at(ss)
            dx = pts[:, 0] - ego.x
            dy = pts[:, 1] - ego.y
            fx = dx * cos_h + dy * sin_h  # forward
            fy = -dx * sin_h + dy * cos_h  # left
            # keep the strictly increasing forward prefix: rows beyond a bend
            # that hooks past 90 degrees are not visible
            dfx = np.diff(fx)
            bad = np.nonzero(dfx <= 1e-9)[0]
            cut = len(fx) if len(bad) == 0 else bad[0] + 1
            fx, fy = fx[:cut], fy[:cut]
        else:
            fx = np.zeros(0)
            fy = np.zeros(0)

        rows = np.arange(H)
        d_rows = p.view_range * (1.0 - rows / (H - 1))
        l_vals = np.linspace(-p.view_half_width, p.view_half_width, W)
        if len(fx) >= 2:
            center = np.interp(d_rows, fx, fy)
            valid = (d_rows >= fx[0]) & (d_rows <= fx[-1])
            offset = np.abs(l_vals[None, :] - center[:, None])
            corridor = valid[:, None] & (offset <= p.corridor_half_width)
            raster[corridor] = CODE_CORRIDOR
            mid = valid[:, None] & (offset <= 0.5)
            raster[mid] = CODE_CENTERLINE

        t_sec = self.time_sec
        for light in self.lights:
            lx = (light.x - ego.x) * cos_h + (light.y - ego.y) * sin_h
            ly = -(light.x - ego.x) * sin_h + (light.y - ego.y) * cos_h
            if not (0.0 <= lx <= p.view_range and abs(ly) <= p.view_half_width + p.corridor_half_width):
                continue
            code = CODE_RED if light.phase(t_sec) == "red" else CODE_GREEN
            r_c = (H - 1) * (1.0 - lx / p.view_range)
            r0 = max(0, int(round(r_c)) - 1)
            r1 = min(H - 1, int(round(r_c)) + 1)
            cols = np.abs(l_vals - ly) <= p.corridor_half_width
            raster[r0:r1 + 1, cols] = code

        for a in self.active_actors():
            ax = (a.x - ego.x) * cos_h + (a.y - ego.y) * sin_h
            ay = -(a.x - ego.x) * sin_h + (a.y - ego.y) * cos_h
            ext = max(a.half_length, a.half_width)
            if not (-ext <= ax <= p.view_range + ext
                    and abs(ay) <= p.view_half_width + ext):
                continue
            r_far = (H - 1) * (1.0 - (ax + a.half_length) / p.view_range)
            r_near = (H - 1) * (1.0 - (ax - a.half_length) / p.view_range)
            r0 = max(0, int(math.floor(r_far)))
            r1 = min(H - 1, int(math.ceil(r_near)))
            c_lo = (ay - a.half_width + p.view_half_width) \
                / (2 * p.view_half_width) * (W - 1)
            c_hi = (ay + a.half_width + p.view_half_width) \
                / (2 * p.view_half_width) * (W - 1)
            c0 = max(0, int(math.floor(c_lo)))
            c1 = min(W - 1, int(math.ceil(c_hi)))
            if r0 <= r1 and c0 <= c1:
                raster[r0:r1 + 1, c0:c1 + 1] = CODE_ACTOR
        return raster

    def observe(self) -> Observation:
        """Clean observation at the current tick."""
        target_s = min(self.route_progress + self.params.lookahead_m,
                       self.route.length)
        return Observation(
            camera=self.render_camera(),
            gps=(self.ego.x, self.ego.y),
            speed=self.ego.speed,
            compass=self.ego.heading,
            target_point=self.route.point_at(target_s),
            stamp=self.tick,
            speed_limit=self.route.speed_limit,
        )
