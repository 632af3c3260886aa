"""Configuration resolution.

Every knob can come from four places; highest priority wins:

    environment variable  >  CLI flag  >  config file  >  built-in default

The environment variable names are fixed (see ENV_VARS); the config file is
YAML with the keys documented in the README. A value of None in the flag or
file layer means "not provided".
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from loopbench.perturb import PerturbationSpec

# (name, description) for every supported environment variable
ENV_VARS = (
    ("ROBUSTNESS_ENABLE", "enable observation-side perturbations (0/1)"),
    ("ROBUSTNESS_SEED", "seed for stochastic perturbations (64-bit int)"),
    ("BURST_MAX_TICKS", "cached burst duration in ticks"),
    ("BURST_PROBABILITY", "probability of triggering a burst event"),
    ("PARTIAL_OBS_RATIO", "occlusion mask ratio for partial observation"),
    ("GPS_NOISE_STD", "standard deviation of GPS localization noise (m)"),
    ("SPEED_BIAS_MEAN", "mean of the Gaussian speed multiplier"),
    ("SPEED_BIAS_STD", "std of the Gaussian speed multiplier"),
    ("INFERENCE_LATENCY_ENABLE", "enable action-side latency injection (0/1)"),
    ("INFERENCE_LATENCY_MS", "fixed inference latency in milliseconds"),
    ("SIM_RATE", "simulation/control rate in Hz"),
)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text: str, name: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"{name} must be boolean-like, got {text!r}")


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    seed: int = 0
    rate_hz: int = 20
    robustness_enable: bool = True
    latency_enable: bool = True
    burst_ticks: int | None = None
    burst_probability: float = 0.1
    mask_ratio: float | None = None
    mask_fill: float = 0.0
    gps_std: float | None = None
    speed_mu: float | None = None
    speed_std: float = 0.2
    latency_ms: float | None = None
    latency_mode: str = "fixed"
    routes_dir: str | None = None
    out_dir: str | None = None
    workers: int = 1
    n_camera_streams: int = 1
    resume: bool = False
    policy_overrides: dict = field(default_factory=dict)


# config-file key -> (RunConfig attribute, parser)
_FILE_KEYS = {
    "seed": ("seed", int),
    "rate_hz": ("rate_hz", int),
    "robustness_enable": ("robustness_enable", bool),
    "latency_enable": ("latency_enable", bool),
    "burst_ticks": ("burst_ticks", int),
    "burst_probability": ("burst_probability", float),
    "mask_ratio": ("mask_ratio", float),
    "mask_fill": ("mask_fill", float),
    "gps_std": ("gps_std", float),
    "speed_mu": ("speed_mu", float),
    "speed_std": ("speed_std", float),
    "latency_ms": ("latency_ms", float),
    "latency_mode": ("latency_mode", str),
    "routes_dir": ("routes_dir", str),
    "out_dir": ("out_dir", str),
    "workers": ("workers", int),
    "n_camera_streams": ("n_camera_streams", int),
    "policy_overrides": ("policy_overrides", dict),
}


def load_config_file(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a mapping")
    unknown = set(data) - set(_FILE_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _env_layer(environ) -> dict:
    """RunConfig attribute overrides drawn from the environment."""
    out: dict = {}

    def get(name):
        value = environ.get(name)
        return None if value is None or value == "" else value

    v = get("ROBUSTNESS_ENABLE")
    if v is not None:
        out["robustness_enable"] = _parse_bool(v, "ROBUSTNESS_ENABLE")
    v = get("ROBUSTNESS_SEED")
    if v is not None:
        out["seed"] = int(v)
    v = get("BURST_MAX_TICKS")
    if v is not None:
        out["burst_ticks"] = int(v)
    v = get("BURST_PROBABILITY")
    if v is not None:
        out["burst_probability"] = float(v)
    v = get("PARTIAL_OBS_RATIO")
    if v is not None:
        out["mask_ratio"] = float(v)
    v = get("GPS_NOISE_STD")
    if v is not None:
        out["gps_std"] = float(v)
    v = get("SPEED_BIAS_MEAN")
    if v is not None:
        out["speed_mu"] = float(v)
    v = get("SPEED_BIAS_STD")
    if v is not None:
        out["speed_std"] = float(v)
    v = get("INFERENCE_LATENCY_ENABLE")
    if v is not None:
        out["latency_enable"] = _parse_bool(v, "INFERENCE_LATENCY_ENABLE")
    v = get("INFERENCE_LATENCY_MS")
    if v is not None:
        out["latency_ms"] = float(v)
    v = get("SIM_RATE")
    if v is not None:
        out["rate_hz"] = int(v)
    return out


def resolve_config(file_cfg: dict | None = None, flags: dict | None = None,
                   environ=None) -> RunConfig:
    """Merge the three layers onto the defaults (env wins, then flags,
    then file)."""
    cfg = RunConfig()
    for layer in (file_cfg or {}, flags or {}, _env_layer(
            environ if environ is not None else os.environ)):
        for key, value in layer.items():
            if value is None:
                continue
            attr = _FILE_KEYS.get(key, (key, None))[0]
            if not hasattr(cfg, attr):
                raise ValueError(f"unknown config key: {key}")
            setattr(cfg, attr, value)
    return cfg


def perturbations_from_config(cfg: RunConfig) -> tuple[PerturbationSpec, ...]:
    """Observation perturbations requested by a resolved config."""
    if not cfg.robustness_enable:
        return ()
    specs = []
    if cfg.burst_ticks is not None:
        specs.append(PerturbationSpec(
            family="burst", burst_len_ticks=cfg.burst_ticks,
            burst_probability=cfg.burst_probability))
    if cfg.mask_ratio is not None and cfg.mask_ratio > 0.0:
        specs.append(PerturbationSpec(
            family="occlusion", mask_ratio=cfg.mask_ratio,
            mask_fill=cfg.mask_fill))
    if cfg.gps_std is not None and cfg.gps_std > 0.0:
        specs.append(PerturbationSpec(family="gps", gps_std=cfg.gps_std))
    if cfg.speed_mu is not None:
        specs.append(PerturbationSpec(
            family="speed", speed_mu=cfg.speed_mu, speed_std=cfg.speed_std))
    return tuple(specs)


def effective_latency_ms(cfg: RunConfig) -> float | None:
    if not cfg.latency_enable or cfg.latency_ms is None:
        return None
    return cfg.latency_ms if cfg.latency_ms > 0 else None
