"""Observation-path perturbations, applied after the sensor and before the
policy.

Four families: cached burst frame drop, rectangular occlusion masking, GPS
additive white noise, and multiplicative speed-reading noise. Every random
draw comes from a per-tick substream keyed by (seed, route, family, tick),
so the realized perturbation sequence is identical for every policy
evaluated on the same route and seed, regardless of how each policy's
rollout unfolds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from loopbench.core import Observation, RandomStream, SeedTree, derive_stream

FAMILIES = ("none", "burst", "occlusion", "gps", "speed")

# fixed composition order when several families are stacked
_FAMILY_ORDER = {"burst": 0, "occlusion": 1, "gps": 2, "speed": 3}


@dataclass(frozen=True)
class PerturbationSpec:
    """Configuration of one perturbation family.

    Only the fields of the active family are consumed. ``forced_starts``
    switches the burst trigger from Bernoulli onset to an exact schedule of
    start ticks, for reproduction and testing.
    """

    family: str = "none"
    burst_len_ticks: int = 20
    burst_probability: float = 0.1
    forced_starts: tuple[int, ...] = ()
    mask_ratio: float = 0.0
    mask_fill: float = 0.0
    gps_std: float = 0.0
    speed_mu: float = 1.0
    speed_std: float = 0.2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown perturbation family: {self.family!r}")
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ValueError("mask_ratio must be in [0, 1)")
        if self.gps_std < 0 or self.speed_std < 0:
            raise ValueError("noise std must be non-negative")
        if self.burst_len_ticks < 1:
            raise ValueError("burst_len_ticks must be >= 1")
        if not 0.0 <= self.burst_probability <= 1.0:
            raise ValueError("burst_probability must be in [0, 1]")


@dataclass
class BurstState:
    """Per-stream burst bookkeeping.

    ``cached_frame`` is the most recent valid frame before the burst began
    (its tick is ``cached_from_tick``, strictly before any tick it is served
    at). ``last_valid`` tracks the newest clean frame seen while no burst is
    active, so a burst starting at tick t serves the frame from t-1.
    """

    active: bool = False
    remaining: int = 0
    cached_frame: np.ndarray | None = None
    cached_from_tick: int = -1
    last_valid: np.ndarray | None = None
    last_valid_tick: int = -1


def burst_step(frame: np.ndarray, stamp: int, state: BurstState,
               spec: PerturbationSpec, tick_stream: RandomStream) -> np.ndarray:
    """Advance one tick of burst logic for a single camera stream; returns
    the frame to emit. Mutates state."""
    if not state.active and state.last_valid is not None:
        if spec.forced_starts:
            trigger = stamp in spec.forced_starts
        else:
            trigger = tick_stream.random() < spec.burst_probability
        if trigger:
            state.active = True
            state.remaining = spec.burst_len_ticks
            state.cached_frame = state.last_valid
            state.cached_from_tick = state.last_valid_tick
    if state.active:
        out = state.cached_frame
        state.remaining -= 1
        if state.remaining <= 0:
            state.active = False
        return out
    state.last_valid = frame.copy()
    state.last_valid_tick = stamp
    return frame


def apply_burst(obs: Observation, state: BurstState, spec: PerturbationSpec,
                stream: RandomStream) -> tuple[Observation, BurstState]:
    """Single-stream burst processor over the whole frame."""
    tick_stream = stream.substream(obs.stamp)
    frame = burst_step(obs.camera, obs.stamp, state, spec, tick_stream)
    if frame is obs.camera:
        return obs, state
    return obs.copy_with(camera=frame), state


def mask_geometry(width: int, height: int, ratio: float,
                  tick_stream: RandomStream) -> tuple[int, int, int, int, int]:
    """Sample a mask rectangle covering exactly ceil(ratio * W * H) pixels.

    Returns (x0, y0, w, h, remainder): full rows of width w starting at
    (x0, y0); if remainder > 0 the final row covers only remainder pixels,
    keeping the total exact.
    """
    target = math.ceil(ratio * width * height)
    aspect = tick_stream.uniform(0.5, 2.0)
    w = int(round(math.sqrt(target * aspect)))
    w = min(max(w, 1), width)
    h = math.ceil(target / w)
    if h > height:
        h = height
        w = math.ceil(target / h)
        h = math.ceil(target / w)
    x0 = tick_stream.randint(0, width - w)
    y0 = tick_stream.randint(0, height - h)
    remainder = target - (h - 1) * w
    return x0, y0, w, h, remainder


def apply_occlusion(obs: Observation, spec: PerturbationSpec,
                    stream: RandomStream) -> Observation:
    """Overwrite a resampled rectangle with the mask fill value."""
    if spec.mask_ratio == 0.0:
        return obs
    hgt, wid = obs.camera.shape
    tick_stream = stream.substream(obs.stamp)
    x0, y0, w, h, rem = mask_geometry(wid, hgt, spec.mask_ratio, tick_stream)
    camera = obs.camera.copy()
    if h > 1:
        camera[y0:y0 + h - 1, x0:x0 + w] = spec.mask_fill
    camera[y0 + h - 1, x0:x0 + rem] = spec.mask_fill
    return obs.copy_with(camera=camera)


def apply_gps_noise(obs: Observation, spec: PerturbationSpec,
                    stream: RandomStream) -> Observation:
    """Additive white Gaussian noise on each GPS axis."""
    tick_stream = stream.substream(obs.stamp)
    ex = tick_stream.gauss(0.0, spec.gps_std)
    ey = tick_stream.gauss(0.0, spec.gps_std)
    return obs.copy_with(gps=(obs.gps[0] + ex, obs.gps[1] + ey))


def apply_speed_noise(obs: Observation, spec: PerturbationSpec,
                      stream: RandomStream) -> tuple[Observation, float]:
    """Multiplicative Gaussian speed-reading noise, clamped at zero.

    Returns the perturbed observation and the pre-clamp multiplier so the
    draw stays auditable in run logs.
    """
    tick_stream = stream.substream(obs.stamp)
    eta = tick_stream.gauss(spec.speed_mu, spec.speed_std)
    return obs.copy_with(speed=max(0.0, eta * obs.speed)), eta


class ObservationPipeline:
    """Composes the enabled perturbation families in a fixed order
    (burst, occlusion, gps, speed) with per-family derived streams.

    ``n_camera_streams`` generalizes the burst processor to N independent
    camera streams realized as vertical slices of the raster, each with its
    own burst state and trigger draws.
    """

    def __init__(self, specs, route_tree: SeedTree, n_camera_streams: int = 1):
        if isinstance(specs, PerturbationSpec):
            specs = [specs]
        specs = [s for s in specs if s.family != "none"]
        self.specs = sorted(specs, key=lambda s: _FAMILY_ORDER[s.family])
        if n_camera_streams < 1:
            raise ValueError("n_camera_streams must be >= 1")
        self.n_camera_streams = n_camera_streams
        self._streams = {s.family: derive_stream(route_tree, s.family)
                         for s in self.specs}
        self._burst_states = [BurstState() for _ in range(n_camera_streams)]

    def _apply_burst(self, obs: Observation, spec: PerturbationSpec,
                     info: dict) -> Observation:
        stream = self._streams["burst"]
        if self.n_camera_streams == 1:
            tick_stream = stream.substream(obs.stamp)
            frame = burst_step(obs.camera, obs.stamp, self._burst_states[0],
                               spec, tick_stream)
            camera = frame if frame is not obs.camera else obs.camera
        else:
            camera = obs.camera.copy()
            bounds = np.linspace(0, obs.camera.shape[1],
                                 self.n_camera_streams + 1).astype(int)
            for i, state in enumerate(self._burst_states):
                lo, hi = bounds[i], bounds[i + 1]
                tick_stream = stream.substream(obs.stamp).substream(i)
                camera[:, lo:hi] = burst_step(
                    np.ascontiguousarray(obs.camera[:, lo:hi]),
                    obs.stamp, state, spec, tick_stream)
        states = self._burst_states
        if any(s.active for s in states):
            info["burst_active"] = 1
            info["burst_t_star"] = [s.cached_from_tick for s in states] \
                if len(states) > 1 else states[0].cached_from_tick
        if camera is obs.camera:
            return obs
        return obs.copy_with(camera=camera)

    def apply(self, obs: Observation) -> tuple[Observation, dict]:
        """Perturb one observation; returns (observation, audit info)."""
        info: dict = {}
        for spec in self.specs:
            if spec.family == "burst":
                obs = self._apply_burst(obs, spec, info)
            elif spec.family == "occlusion":
                obs = apply_occlusion(obs, spec, self._streams["occlusion"])
            elif spec.family == "gps":
                obs = apply_gps_noise(obs, spec, self._streams["gps"])
            elif spec.family == "speed":
                obs, eta = apply_speed_noise(obs, spec,
                                             self._streams["speed"])
                info["speed_eta"] = round(eta, 9)
        return obs, info


# ---------------------------------------------------------------------------
# severity presets

PRESET_PERTURBATIONS: dict[str, PerturbationSpec] = {
    "occlusion_0.5": PerturbationSpec(family="occlusion", mask_ratio=0.5),
    "occlusion_0.8": PerturbationSpec(family="occlusion", mask_ratio=0.8),
    "burst_1s": PerturbationSpec(family="burst", burst_len_ticks=20),
    "burst_3s": PerturbationSpec(family="burst", burst_len_ticks=60),
    "gps_5m": PerturbationSpec(family="gps", gps_std=5.0),
    "gps_15m": PerturbationSpec(family="gps", gps_std=15.0),
    "speed_mu_0.5": PerturbationSpec(family="speed", speed_mu=0.5),
    "speed_mu_0.2": PerturbationSpec(family="speed", speed_mu=0.2),
}

PRESET_LATENCIES_MS: dict[str, float] = {
    "latency_100ms": 100.0,
    "latency_200ms": 200.0,
    "latency_500ms": 500.0,
}
