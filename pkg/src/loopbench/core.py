"""Shared domain types, seeded deterministic randomness, and tick conventions.

All stochastic behaviour in the package flows through :class:`RandomStream`
handles derived from a :class:`SeedTree`, so two runs with the same seed and
derivation path produce identical draws on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIM_RATE_DEFAULT = 20  # simulation ticks per second

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: 64-bit avalanche mix."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _label_hash(label: "str | int") -> int:
    if isinstance(label, int):
        return _mix64((label + 1) * _GOLDEN)
    return _fnv1a64(str(label).encode("utf-8"))


class RandomStream:
    """Counter-based deterministic random stream.

    Output i is ``mix64(key + i * golden)``; the key is derived from a seed
    and a label path, so streams with distinct derivations are independent
    and a stream can be reconstructed from its derivation alone.
    """

    __slots__ = ("key", "_counter", "_gauss_cache")

    def __init__(self, key: int):
        self.key = key & _MASK64
        self._counter = 0
        self._gauss_cache: float | None = None

    def next_u64(self) -> int:
        self._counter += 1
        return _mix64((self.key + self._counter * _GOLDEN) & _MASK64)

    def random(self) -> float:
        """Uniform draw in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        return lo + int(self.random() * span) % span

    def gauss(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Normal draw via Box-Muller on the unit-interval output.

        Pairs are generated together and the second value cached, so draws
        come in deterministic (cos, sin) couples.
        """
        if std < 0:
            raise ValueError(f"std must be >= 0, got {std}")
        if self._gauss_cache is not None:
            z = self._gauss_cache
            self._gauss_cache = None
        else:
            # u1 in (0, 1] so the log is finite.
            u1 = ((self.next_u64() >> 11) + 1) * (2.0 ** -53)
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            z = r * math.cos(2.0 * math.pi * u2)
            self._gauss_cache = r * math.sin(2.0 * math.pi * u2)
        return mean + std * z

    def substream(self, label: "str | int") -> "RandomStream":
        """Independent child stream; same (stream, label) always yields the
        same child regardless of how much of the parent was consumed."""
        return RandomStream(_mix64(self.key ^ _label_hash(label)))


@dataclass(frozen=True)
class SeedTree:
    """A global seed plus an ordered derivation path of labels.

    Identical (seed, path) pairs give identical streams; distinct paths give
    statistically independent ones.
    """

    global_seed: int
    path: tuple[str, ...] = ()

    def child(self, label: str) -> "SeedTree":
        if not label:
            raise ValueError("derivation label must be non-empty")
        return SeedTree(self.global_seed, self.path + (label,))

    @property
    def key(self) -> int:
        k = _mix64(self.global_seed & _MASK64)
        for label in self.path:
            k = _mix64(k ^ _fnv1a64(label.encode("utf-8")))
        return k


def derive_stream(tree: SeedTree, label: str) -> RandomStream:
    """Derive a stateful random stream for `label` under `tree`."""
    if not label:
        raise ValueError("derivation label must be non-empty")
    return RandomStream(tree.child(label).key)


def sample_gaussian(stream: RandomStream, mean: float, std: float) -> float:
    """Draw from N(mean, std^2); std = 0 returns mean exactly."""
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    return stream.gauss(mean, std)


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    elif theta > math.pi:
        theta -= 2.0 * math.pi
    return theta


@dataclass(frozen=True)
class Tick:
    """Simulation clock position: wall time = index / rate_hz seconds."""

    index: int
    rate_hz: int = SIM_RATE_DEFAULT

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("tick index must be non-negative")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")

    @property
    def seconds(self) -> float:
        return self.index / self.rate_hz

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    def advanced(self) -> "Tick":
        return Tick(self.index + 1, self.rate_hz)


@dataclass(frozen=True)
class EgoState:
    """Ground-truth ego vehicle state."""

    x: float
    y: float
    heading: float  # radians, normalized to (-pi, pi]
    speed: float  # m/s, >= 0
    acceleration: float = 0.0  # m/s^2, signed longitudinal
    steer_angle: float = 0.0  # radians at the front axle

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Action:
    """Control command: throttle/brake in [0,1], steer in [-1,1]."""

    throttle: float
    brake: float
    steer: float
    created_tick: int = 0

    def __post_init__(self):
        if not (0.0 <= self.throttle <= 1.0):
            raise ValueError(f"throttle out of [0,1]: {self.throttle}")
        if not (0.0 <= self.brake <= 1.0):
            raise ValueError(f"brake out of [0,1]: {self.brake}")
        if not (-1.0 <= self.steer <= 1.0):
            raise ValueError(f"steer out of [-1,1]: {self.steer}")
        if self.created_tick < 0:
            raise ValueError("created_tick must be non-negative")

    @classmethod
    def clamped(cls, throttle: float, brake: float, steer: float,
                created_tick: int = 0) -> "Action":
        return cls(
            throttle=min(1.0, max(0.0, throttle)),
            brake=min(1.0, max(0.0, brake)),
            steer=min(1.0, max(-1.0, steer)),
            created_tick=created_tick,
        )


def stop_action(created_tick: int = 0) -> Action:
    """Full brake, zero throttle, zero steer."""
    return Action(throttle=0.0, brake=1.0, steer=0.0, created_tick=created_tick)


@dataclass
class Observation:
    """What the policy sees at a tick.

    ``camera`` is a (H, W) float array in [0, 1]. ``stamp`` always equals the
    tick at which the simulator emitted the observation, even when the camera
    content is stale. ``compass`` mirrors the true heading and is never
    perturbed; it exists because steering controllers need an ego-frame
    transform alongside the (perturbable) GPS translation.
    """

    camera: np.ndarray
    gps: tuple[float, float]
    speed: float
    compass: float
    target_point: tuple[float, float]
    stamp: int
    speed_limit: float = 0.0

    def copy_with(self, **changes) -> "Observation":
        out = Observation(
            camera=self.camera,
            gps=self.gps,
            speed=self.speed,
            compass=self.compass,
            target_point=self.target_point,
            stamp=self.stamp,
            speed_limit=self.speed_limit,
        )
        for k, v in changes.items():
            setattr(out, k, v)
        return out
