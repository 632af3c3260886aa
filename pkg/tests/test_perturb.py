import math

import numpy as np
import pytest

from loopbench.core import Observation, RandomStream, SeedTree
from loopbench.perturb import (
    PRESET_LATENCIES_MS,
    PRESET_PERTURBATIONS,
    BurstState,
    ObservationPipeline,
    PerturbationSpec,
    apply_burst,
    apply_gps_noise,
    apply_occlusion,
    apply_speed_noise,
    burst_step,
    mask_geometry,
)


def obs(stamp, camera=None, speed=10.0):
    if camera is None:
        camera = np.full((8, 8), 0.1 + 0.001 * stamp, dtype=np.float32)
    return Observation(camera=camera, gps=(3.0, -2.0), speed=speed,
                       compass=0.0, target_point=(8.0, 0.0), stamp=stamp,
                       speed_limit=6.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(family="fog")
    with pytest.raises(ValueError):
        PerturbationSpec(family="occlusion", mask_ratio=1.0)
    with pytest.raises(ValueError):
        PerturbationSpec(family="gps", gps_std=-1.0)
    with pytest.raises(ValueError):
        PerturbationSpec(family="burst", burst_len_ticks=0)
    with pytest.raises(ValueError):
        PerturbationSpec(family="burst", burst_probability=1.5)


def test_burst_replays_last_valid_frame():
    spec = PerturbationSpec(family="burst", burst_len_ticks=5,
                            forced_starts=(10,))
    state = BurstState()
    stream = RandomStream(1)
    frames = {}
    for t in range(20):
        out = burst_step(obs(t).camera, t, state, spec,
                         stream.substream(t))
        frames[t] = out.copy()
    for t in range(10, 15):
        assert np.array_equal(frames[t], frames[9])
    assert not np.array_equal(frames[15], frames[9])
    assert np.array_equal(frames[15], obs(15).camera)


def test_burst_cannot_start_without_history():
    """A burst never fires on the very first frame: there is nothing valid
    to cache, so no all-zero or garbage frame can be emitted."""
    spec = PerturbationSpec(family="burst", burst_len_ticks=5,
                            burst_probability=1.0)
    state = BurstState()
    stream = RandomStream(2)
    first = obs(0).camera
    out = burst_step(first, 0, state, spec, stream.substream(0))
    assert np.array_equal(out, first)
    # from tick 1 on, probability 1 forces a burst serving the tick-0 frame
    out = burst_step(obs(1).camera, 1, state, spec, stream.substream(1))
    assert np.array_equal(out, first)
    assert state.cached_from_tick == 0


def test_apply_burst_preserves_stamp():
    spec = PerturbationSpec(family="burst", burst_len_ticks=3,
                            forced_starts=(2,))
    state = BurstState()
    stream = RandomStream(3)
    for t in range(6):
        out, state = apply_burst(obs(t), state, spec, stream)
        assert out.stamp == t


def test_mask_geometry_exact_count():
    stream = RandomStream(5)
    for r in (0.1, 0.3, 0.5, 0.8, 0.9):
        for w, h in ((64, 64), (32, 48), (10, 10)):
            target = math.ceil(r * w * h)
            x0, y0, mw, mh, rem = mask_geometry(w, h, r, stream)
            covered = (mh - 1) * mw + rem
            assert covered == target
            assert 0 <= x0 <= w - mw
            assert 0 <= y0 <= h - mh
            assert 1 <= rem <= mw


def test_apply_occlusion_exact_pixels():
    spec = PerturbationSpec(family="occlusion", mask_ratio=0.3)
    camera = np.ones((10, 10), dtype=np.float32)
    out = apply_occlusion(obs(4, camera=camera), spec, RandomStream(7))
    assert int(np.sum(out.camera == 0.0)) == 30
    assert int(np.sum(camera == 0.0)) == 0  # input untouched


def test_occlusion_fill_value():
    spec = PerturbationSpec(family="occlusion", mask_ratio=0.5, mask_fill=0.9)
    out = apply_occlusion(obs(4), spec, RandomStream(7))
    assert int(np.sum(out.camera == np.float32(0.9))) == 32


def test_occlusion_zero_ratio_is_identity():
    spec = PerturbationSpec(family="occlusion", mask_ratio=0.0)
    o = obs(1)
    assert apply_occlusion(o, spec, RandomStream(7)) is o


def test_mask_same_tick_same_geometry_across_consumers():
    """Two consumers with the same (seed, route) derivation draw identical
    masks at the same tick even after different interleaved draws."""
    tree = SeedTree(9, ("route_z",))
    a = RandomStream(tree.child("occlusion").key)
    b = RandomStream(tree.child("occlusion").key)
    b.random()
    b.random()
    for t in (0, 5, 123):
        assert mask_geometry(64, 64, 0.5, a.substream(t)) == \
            mask_geometry(64, 64, 0.5, b.substream(t))


def test_gps_noise_touches_only_gps():
    spec = PerturbationSpec(family="gps", gps_std=5.0)
    o = obs(3)
    out = apply_gps_noise(o, spec, RandomStream(11))
    assert out.gps != o.gps
    assert out.camera is o.camera
    assert out.speed == o.speed
    assert out.compass == o.compass
    assert out.stamp == o.stamp


def test_speed_noise_multiplicative_and_clamped():
    spec = PerturbationSpec(family="speed", speed_mu=0.5, speed_std=0.2)
    o = obs(3, speed=10.0)
    out, eta = apply_speed_noise(o, spec, RandomStream(13))
    assert out.speed == pytest.approx(10.0 * max(0.0, eta))
    assert out.camera is o.camera
    # force a deeply negative draw via a huge std: the reported speed clamps
    # at zero but the pre-clamp eta stays auditable
    spec = PerturbationSpec(family="speed", speed_mu=-50.0, speed_std=0.0)
    out, eta = apply_speed_noise(o, spec, RandomStream(13))
    assert out.speed == 0.0
    assert eta == -50.0


def test_speed_noise_zero_std_is_exact_mu():
    spec = PerturbationSpec(family="speed", speed_mu=0.5, speed_std=0.0)
    out, eta = apply_speed_noise(obs(0, speed=8.0), spec, RandomStream(1))
    assert eta == 0.5
    assert out.speed == pytest.approx(4.0)


def test_gps_draws_independent_of_other_families():
    """Consuming the occlusion stream must not shift gps draws: families own
    derived streams keyed by family label."""
    tree = SeedTree(0, ("route_q",))
    solo = ObservationPipeline(
        PerturbationSpec(family="gps", gps_std=5.0), tree)
    combo = ObservationPipeline(
        [PerturbationSpec(family="gps", gps_std=5.0),
         PerturbationSpec(family="occlusion", mask_ratio=0.5)],
        SeedTree(0, ("route_q",)))
    for t in range(6):
        a, _ = solo.apply(obs(t))
        b, _ = combo.apply(obs(t))
        assert a.gps == b.gps


def test_pipeline_orders_families_canonically():
    specs = [PerturbationSpec(family="speed", speed_mu=0.5),
             PerturbationSpec(family="gps", gps_std=5.0),
             PerturbationSpec(family="occlusion", mask_ratio=0.5),
             PerturbationSpec(family="burst")]
    pipe = ObservationPipeline(specs, SeedTree(0, ("r",)))
    assert [s.family for s in pipe.specs] == ["burst", "occlusion", "gps",
                                              "speed"]


def test_pipeline_filters_none_and_validates_streams():
    pipe = ObservationPipeline(PerturbationSpec(family="none"),
                               SeedTree(0, ("r",)))
    assert pipe.specs == []
    o = obs(0)
    out, info = pipe.apply(o)
    assert out is o and info == {}
    with pytest.raises(ValueError):
        ObservationPipeline([], SeedTree(0, ("r",)), n_camera_streams=0)


def test_pipeline_does_not_mutate_input():
    pipe = ObservationPipeline(
        [PerturbationSpec(family="occlusion", mask_ratio=0.5),
         PerturbationSpec(family="gps", gps_std=5.0),
         PerturbationSpec(family="speed", speed_mu=0.5)],
        SeedTree(0, ("r",)))
    o = obs(2)
    cam = o.camera.copy()
    pipe.apply(o)
    assert np.array_equal(o.camera, cam)
    assert o.gps == (3.0, -2.0)
    assert o.speed == 10.0


def test_pipeline_is_deterministic():
    def run():
        pipe = ObservationPipeline(
            [PerturbationSpec(family="gps", gps_std=5.0),
             PerturbationSpec(family="speed", speed_mu=0.5)],
            SeedTree(42, ("r",)))
        return [pipe.apply(obs(t))[0].gps for t in range(5)]

    assert run() == run()


def test_pipeline_speed_eta_in_info():
    pipe = ObservationPipeline(PerturbationSpec(family="speed", speed_mu=0.5),
                               SeedTree(0, ("r",)))
    _, info = pipe.apply(obs(0))
    assert "speed_eta" in info


def test_two_camera_streams_burst_independently():
    spec = PerturbationSpec(family="burst", burst_len_ticks=4,
                            burst_probability=0.5)
    pipe = ObservationPipeline(spec, SeedTree(3, ("r",)), n_camera_streams=2)
    # run until exactly one half is stale at some tick, proving stream
    # triggers draw independently
    saw_split = False
    for t in range(200):
        camera = np.full((8, 8), 0.1 + 0.001 * t, dtype=np.float32)
        out, _ = pipe.apply(obs(t, camera=camera))
        left_stale = not np.array_equal(out.camera[:, :4], camera[:, :4])
        right_stale = not np.array_equal(out.camera[:, 4:], camera[:, 4:])
        if left_stale != right_stale:
            saw_split = True
            break
    assert saw_split


def test_two_camera_streams_forced_start_hits_both():
    spec = PerturbationSpec(family="burst", burst_len_ticks=4,
                            forced_starts=(3,))
    pipe = ObservationPipeline(spec, SeedTree(3, ("r",)), n_camera_streams=2)
    outs = {}
    for t in range(8):
        camera = np.full((8, 8), 0.1 + 0.001 * t, dtype=np.float32)
        out, info = pipe.apply(obs(t, camera=camera))
        outs[t] = (out.camera.copy(), info)
    stale, info = outs[3]
    assert np.array_equal(stale, outs[2][0])
    assert info.get("burst_active") == 1
    assert info.get("burst_t_star") == [2, 2]


def test_presets_cover_the_grid():
    assert set(PRESET_PERTURBATIONS) == {
        "occlusion_0.5", "occlusion_0.8", "burst_1s", "burst_3s",
        "gps_5m", "gps_15m", "speed_mu_0.5", "speed_mu_0.2",
    }
    assert PRESET_PERTURBATIONS["burst_1s"].burst_len_ticks == 20
    assert PRESET_PERTURBATIONS["burst_3s"].burst_len_ticks == 60
    assert PRESET_PERTURBATIONS["burst_1s"].burst_probability == 0.1
    assert PRESET_PERTURBATIONS["occlusion_0.8"].mask_ratio == 0.8
    assert PRESET_PERTURBATIONS["gps_15m"].gps_std == 15.0
    assert PRESET_PERTURBATIONS["speed_mu_0.2"].speed_mu == 0.2
    assert PRESET_PERTURBATIONS["speed_mu_0.2"].speed_std == 0.2
    assert PRESET_LATENCIES_MS == {"latency_100ms": 100.0,
                                   "latency_200ms": 200.0,
                                   "latency_500ms": 500.0}
