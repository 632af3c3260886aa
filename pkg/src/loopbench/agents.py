"""Reference driving policies with heterogeneous channel usage.

Three fixed controllers stand in for learned driving models. They share a
pure-pursuit steering core and a proportional speed loop but differ in which
observation channels they consume, so each perturbation family has a
distinct mechanistic path to failure:

* full-pursuit: camera (brake on threats), gps + compass (ego transform),
  speed. Degrades under every family.
* blind-follower: ignores the camera entirely; immune to burst/occlusion,
  collides with anything the camera would have shown.
* deadreckon: ignores gps and compass; integrates its own pose from the
  observed speed and its last steering command (all bundled routes start at
  the local origin heading +x). Bit-immune to GPS noise, sensitive to speed
  noise and latency, which corrupt the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from loopbench.core import Action, Observation, stop_action
from loopbench.world import CODE_ACTOR, CODE_RED, WorldParams

POLICY_NAMES = ("full-pursuit", "blind-follower", "deadreckon")


@dataclass(frozen=True)
class PolicySpec:
    name: str
    uses_camera: bool
    uses_gps: bool
    uses_speed: bool
    uses_compass: bool = True
    lookahead_m: float = 8.0
    accel_kp: float = 2.0  # m/s^2 per m/s of speed error
    accel_limit: float = 2.5  # comfort-shaped command bound, m/s^2
    brake_threshold_m: float = 9.0
    threat_half_width_m: float = 2.5


def camera_threat(camera: np.ndarray, spec: PolicySpec,
                  params: WorldParams) -> bool:
    """True when an actor blob or red-light block sits in the near central
    window of the raster (within brake_threshold_m ahead, close to the
    corridor center)."""
    h, w = camera.shape
    r0 = int(math.ceil((h - 1) * (1.0 - spec.brake_threshold_m
                                  / params.view_range)))
    l_vals = np.linspace(-params.view_half_width, params.view_half_width, w)
    cols = np.abs(l_vals) <= spec.threat_half_width_m
    window = camera[max(r0, 0):, cols]
    return bool(np.any(window == np.float32(CODE_ACTOR))
                or np.any(window == np.float32(CODE_RED)))


def observation_ok(obs: Observation) -> bool:
    """Minimal well-formedness check; policies emit a safe stop otherwise."""
    try:
        if not isinstance(obs.camera, np.ndarray) or obs.camera.ndim != 2:
            return False
        scalars = (obs.gps[0], obs.gps[1], obs.speed, obs.compass,
                   obs.target_point[0], obs.target_point[1], obs.speed_limit)
        return all(math.isfinite(v) for v in scalars)
    except (TypeError, IndexError, AttributeError):
        return False


def pursuit_steer(forward: float, left: float, wheelbase: float,
                  max_steer: float) -> float:
    """Pure-pursuit steering command in [-1, 1] toward an ego-frame target."""
    d2 = forward * forward + left * left
    if d2 < 1.0:
        return 0.0
    if forward <= 0.0:
        return 1.0 if left >= 0.0 else -1.0
    curvature = 2.0 * left / d2
    delta = math.atan(curvature * wheelbase)
    return max(-1.0, min(1.0, delta / max_steer))


def _speed_action(v_obs: float, limit: float, spec: PolicySpec,
                  params: WorldParams) -> tuple[float, float]:
    """Proportional speed loop returning (throttle, brake)."""
    accel = spec.accel_kp * (limit - v_obs)
    accel = max(-spec.accel_limit, min(spec.accel_limit, accel))
    if accel >= 0.0:
        return min(1.0, accel / params.max_accel), 0.0
    return 0.0, min(1.0, -accel / params.max_decel)


class PurePursuitPolicy:
    """Stateless controller; camera usage switched by its PolicySpec."""

    def __init__(self, spec: PolicySpec, params: WorldParams):
        self.spec = spec
        self.params = params

    def reset(self) -> None:
        pass

    def step(self, obs: Observation) -> Action:
        if not observation_ok(obs):
            return stop_action(created_tick=obs.stamp)
        spec = self.spec
        dx = obs.target_point[0] - obs.gps[0]
        dy = obs.target_point[1] - obs.gps[1]
        cos_h = math.cos(obs.compass)
        sin_h = math.sin(obs.compass)
        forward = dx * cos_h + dy * sin_h
        left = -dx * sin_h + dy * cos_h
        steer = pursuit_steer(forward, left, self.params.wheelbase,
                              self.params.max_steer)
        if spec.uses_camera and camera_threat(obs.camera, spec, self.params):
            return Action(throttle=0.0, brake=1.0, steer=steer,
                          created_tick=obs.stamp)
        throttle, brake = _speed_action(obs.speed, obs.speed_limit, spec,
                                        self.params)
        return Action(throttle=throttle, brake=brake, steer=steer,
                      created_tick=obs.stamp)


class DeadReckonPolicy:
    """Pose from an internal integrator instead of gps/compass.

    The integrator mirrors the simulator's exact-arc bicycle update using
    the observed speed and the previously commanded steer, starting from the
    route-local origin. The state is rollout-local; construct a fresh policy
    (or call reset) per rollout.
    """

    def __init__(self, spec: PolicySpec, params: WorldParams):
        self.spec = spec
        self.params = params
        self.reset()

    def reset(self) -> None:
        self._x = 0.0
        self._y = 0.0
        self._heading = 0.0
        self._last_stamp = -1
        self._last_delta = 0.0

    def step(self, obs: Observation) -> Action:
        if not observation_ok(obs):
            return stop_action(created_tick=obs.stamp)
        return self._act(obs)

    def _integrate(self, v: float) -> None:
        dt = self.params.dt
        kappa = math.tan(self._last_delta) / self.params.wheelbase
        omega = v * kappa
        if abs(omega) * dt < 1e-9:
            self._x += v * dt * math.cos(self._heading)
            self._y += v * dt * math.sin(self._heading)
        else:
            radius = v / omega
            th1 = self._heading + omega * dt
            self._x += radius * (math.sin(th1) - math.sin(self._heading))
            self._y -= radius * (math.cos(th1) - math.cos(self._heading))
            self._heading = th1

    def _act(self, obs: Observation) -> Action:
        spec = self.spec
        if self._last_stamp >= 0 and obs.stamp > self._last_stamp:
            self._integrate(obs.speed)
        self._last_stamp = obs.stamp
        dx = obs.target_point[0] - self._x
        dy = obs.target_point[1] - self._y
        cos_h = math.cos(self._heading)
        sin_h = math.sin(self._heading)
        forward = dx * cos_h + dy * sin_h
        left = -dx * sin_h + dy * cos_h
        steer = pursuit_steer(forward, left, self.params.wheelbase,
                              self.params.max_steer)
        self._last_delta = steer * self.params.max_steer
        if spec.uses_camera and camera_threat(obs.camera, spec, self.params):
            return Action(throttle=0.0, brake=1.0, steer=steer,
                          created_tick=obs.stamp)
        throttle, brake = _speed_action(obs.speed, obs.speed_limit, spec,
                                        self.params)
        return Action(throttle=throttle, brake=brake, steer=steer,
                      created_tick=obs.stamp)


DEFAULT_SPECS: dict[str, PolicySpec] = {
    "full-pursuit": PolicySpec(name="full-pursuit", uses_camera=True,
                               uses_gps=True, uses_speed=True),
    "blind-follower": PolicySpec(name="blind-follower", uses_camera=False,
                                 uses_gps=True, uses_speed=True),
    "deadreckon": PolicySpec(name="deadreckon", uses_camera=True,
                             uses_gps=False, uses_speed=True,
                             uses_compass=False),
}


def make_policy(name: str, params: WorldParams | None = None,
                **overrides):
    """Fresh policy instance for one rollout."""
    if name not in DEFAULT_SPECS:
        raise KeyError(f"unknown policy: {name!r}")
    params = params or WorldParams()
    spec = DEFAULT_SPECS[name]
    if overrides:
        from dataclasses import replace
        spec = replace(spec, **overrides)
    if name == "deadreckon":
        return DeadReckonPolicy(spec, params)
    return PurePursuitPolicy(spec, params)
