"""Self-verification checks: every derived oracle in one place.

Each check is a named function returning (ok, detail). The CLI `verify`
verb runs them and reports pass/fail per name; `--inject-fault NAME` forces
the named check to fail, which exercises the reporting path end to end.
"""

from __future__ import annotations

import math

import numpy as np

from loopbench.core import Action, Observation, RandomStream, SeedTree
from loopbench.latency import ActionBuffer, ticks_from_ms
from loopbench.perturb import (
    BurstState,
    PerturbationSpec,
    apply_burst,
    apply_gps_noise,
    apply_occlusion,
    apply_speed_noise,
    mask_geometry,
)
from loopbench.reference import check_reference_consistency


def _tiny_obs(stamp: int, camera=None, speed: float = 10.0) -> Observation:
    if camera is None:
        camera = np.zeros((2, 2), dtype=np.float32)
    return Observation(camera=camera, gps=(0.0, 0.0), speed=speed,
                       compass=0.0, target_point=(8.0, 0.0), stamp=stamp,
                       speed_limit=6.0)


def check_rd_fixture() -> tuple[bool, str]:
    problems = check_reference_consistency()
    if problems:
        return False, "; ".join(problems[:5])
    return True, "all published RD and aggregate rows reproduced"


def check_ticks_conversion() -> tuple[bool, str]:
    want = {100.0: 2, 200.0: 4, 500.0: 10, 0.0: 0, 120.0: 2, 49.0: 0}
    for ms, ticks in want.items():
        got = ticks_from_ms(ms, 20)
        if got != ticks:
            return False, f"ticks_from_ms({ms}, 20) = {got}, want {ticks}"
    return True, "floor conversion matches at 20 Hz"


def check_fifo_shift() -> tuple[bool, str]:
    rng = RandomStream(2024)
    for trial in range(100):
        delay = rng.randint(0, 50)
        n = rng.randint(delay + 1, delay + 40)
        actions = [Action(throttle=rng.random(), brake=0.0,
                          steer=rng.uniform(-1, 1), created_tick=t)
                   for t in range(n)]
        buf = ActionBuffer(mode="fixed", delay_ticks=delay, rate_hz=20)
        for t, fresh in enumerate(actions):
            applied = buf.push_then_pop(fresh, t)
            if t < delay:
                if applied is not buf.warmup_action:
                    return False, f"trial {trial}: warmup missing at t={t}"
            elif applied.created_tick != t - delay:
                return False, (f"trial {trial}: applied at t={t} created at "
                               f"{applied.created_tick}, want {t - delay}")
    return True, "applied sequence equals input shifted by delta"


def check_mode_consistency() -> tuple[bool, str]:
    rate = 20
    period_ms = 1000.0 / rate
    for mult in range(2, 7):
        ms = mult * period_ms
        delay = ticks_from_ms(ms, rate)
        fixed = ActionBuffer(mode="fixed", delay_ticks=delay, rate_hz=rate)
        realtime = ActionBuffer(mode="realtime", delay_ticks=0, rate_hz=rate)
        for t in range(60):
            fresh = Action(throttle=(t % 10) / 10.0, brake=0.0, steer=0.0,
                           created_tick=t)
            a = fixed.push_then_pop(fresh, t)
            b = realtime.realtime_apply(fresh, ms, t)
            if t >= delay and (a.throttle, a.created_tick) != (b.throttle,
                                                               b.created_tick):
                return False, (f"m={ms}ms diverges at t={t}: fixed creates "
                               f"{a.created_tick}, realtime {b.created_tick}")
    return True, "fixed and realtime agree on constant whole-period traces"


def check_burst_contract() -> tuple[bool, str]:
    for k in (20, 60):
        spec = PerturbationSpec(family="burst", burst_len_ticks=k,
                                forced_starts=(100,))
        state = BurstState()
        stream = RandomStream(7)
        frames = {}
        for t in range(170):
            camera = np.full((4, 4), 0.1 + 0.001 * t, dtype=np.float32)
            obs = _tiny_obs(t, camera=camera)
            out, state = apply_burst(obs, state, spec, stream)
            frames[t] = out.camera.copy()
            if out.stamp != t:
                return False, f"stamp frozen at t={t}"
            if not out.camera.any():
                return False, f"all-zero frame emitted at t={t}"
        for t in range(100, 100 + k):
            if not np.array_equal(frames[t], frames[99]):
                return False, f"k={k}: tick {t} is not the t=99 frame"
        if np.array_equal(frames[100 + k], frames[99]):
            return False, f"k={k}: burst lasted longer than {k} ticks"
    return True, "forced bursts emit the last valid frame for exactly k ticks"


def check_mask_exactness() -> tuple[bool, str]:
    stream = RandomStream(11)
    for r in [round(0.1 * i, 1) for i in range(1, 10)]:
        for w, h in ((64, 64), (48, 32)):
            target = math.ceil(r * w * h)
            for trial in range(20):
                tick = stream.randint(0, 10_000)
                obs = Observation(camera=np.ones((h, w), dtype=np.float32),
                                  gps=(0.0, 0.0), speed=0.0, compass=0.0,
                                  target_point=(0.0, 0.0), stamp=tick,
                                  speed_limit=1.0)
                spec = PerturbationSpec(family="occlusion", mask_ratio=r)
                masked = apply_occlusion(obs, spec, stream)
                count = int(np.sum(masked.camera == 0.0))
                if count != target:
                    return False, (f"r={r} {w}x{h}: {count} masked, "
                                   f"want {target}")
    return True, "masked pixel count is exactly ceil(r*W*H) across the sweep"


def _lag1_autocorr(xs: np.ndarray) -> float:
    xs = xs - xs.mean()
    denom = float(np.dot(xs, xs))
    if denom == 0.0:
        return 0.0
    return float(np.dot(xs[:-1], xs[1:]) / denom)


def check_noise_stats() -> tuple[bool, str]:
    n = 100_000
    for sigma in (5.0, 15.0):
        spec = PerturbationSpec(family="gps", gps_std=sigma)
        stream = RandomStream(97 + int(sigma))
        ex = np.empty(n)
        ey = np.empty(n)
        for t in range(n):
            out = apply_gps_noise(_tiny_obs(t), spec, stream)
            ex[t] = out.gps[0]
            ey[t] = out.gps[1]
        for axis, arr in (("x", ex), ("y", ey)):
            std = float(arr.std())
            if not sigma * 0.98 <= std <= sigma * 1.02:
                return False, f"gps sigma={sigma} axis {axis}: std {std:.3f}"
            rho = _lag1_autocorr(arr)
            if abs(rho) >= 0.02:
                return False, (f"gps sigma={sigma} axis {axis}: lag-1 "
                               f"autocorrelation {rho:.4f}")
    for mu in (0.2, 0.5):
        spec = PerturbationSpec(family="speed", speed_mu=mu, speed_std=0.2)
        stream = RandomStream(5 + int(mu * 10))
        etas = np.empty(n)
        for t in range(n):
            _, eta = apply_speed_noise(_tiny_obs(t, speed=10.0), spec, stream)
            etas[t] = eta
        mean = float(etas.mean())
        std = float(etas.std())
        if abs(mean - mu) > 0.025 * mu:
            return False, f"speed mu={mu}: pre-clamp mean {mean:.4f}"
        if abs(std - 0.2) > 0.05 * 0.2:
            return False, f"speed mu={mu}: pre-clamp std {std:.4f}"
    return True, "GPS and speed noise match their moments; GPS is white"


def check_gaussian_moments() -> tuple[bool, str]:
    stream = RandomStream(123)
    xs = np.array([stream.gauss(0.0, 5.0) for _ in range(100_000)])
    if not 4.9 <= float(xs.std()) <= 5.1:
        return False, f"std {xs.std():.3f} outside [4.9, 5.1]"
    stream = RandomStream(124)
    ys = np.array([stream.gauss(0.2, 0.2) for _ in range(100_000)])
    if not 0.195 <= float(ys.mean()) <= 0.205:
        return False, f"mean {ys.mean():.4f} outside [0.195, 0.205]"
    return True, "sampler moments within 2% at N=1e5"


def check_mask_cross_policy() -> tuple[bool, str]:
    """Identical (seed, route, tick) must give identical masks even when the
    two consumers draw in different orders between ticks."""
    spec = PerturbationSpec(family="occlusion", mask_ratio=0.5)
    tree = SeedTree(42, ("route_x",))
    a = RandomStream(tree.child("occlusion").key)
    b = RandomStream(tree.child("occlusion").key)
    for t in (0, 3, 17, 400):
        geo_a = mask_geometry(64, 64, 0.5, a.substream(t))
        # consumer b draws extra values between ticks
        b.random()
        b.random()
        geo_b = mask_geometry(64, 64, 0.5, b.substream(t))
        if geo_a != geo_b:
            return False, f"mask geometry diverges at tick {t}"
    _ = spec
    return True, "per-tick substreams make masks policy-independent"


CHECKS = {
    "rd-fixture": check_rd_fixture,
    "ticks-conversion": check_ticks_conversion,
    "fifo-shift": check_fifo_shift,
    "mode-consistency": check_mode_consistency,
    "burst-contract": check_burst_contract,
    "mask-exactness": check_mask_exactness,
    "mask-cross-policy": check_mask_cross_policy,
    "gaussian-moments": check_gaussian_moments,
    "noise-stats": check_noise_stats,
}


def run_checks(names=None, inject_fault: str | None = None) -> dict:
    """Run named checks (all by default); returns {name: (ok, detail)}."""
    if names:
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise KeyError(f"unknown checks: {', '.join(unknown)}")
        selected = {n: CHECKS[n] for n in names}
    else:
        selected = dict(CHECKS)
    results = {}
    for name, fn in selected.items():
        ok, detail = fn()
        if inject_fault == name:
            ok, detail = False, "injected fault (test-only)"
        results[name] = (ok, detail)
    return results
