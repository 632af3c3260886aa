import pytest

from loopbench.core import Action, RandomStream
from loopbench.latency import ActionBuffer, load_latency_trace, ticks_from_ms


def seq(n, start=0):
    return [Action(throttle=(t % 10) / 10.0, brake=0.0, steer=0.0,
                   created_tick=t + start) for t in range(n)]


def test_ticks_from_ms_floor():
    assert ticks_from_ms(100.0, 20) == 2
    assert ticks_from_ms(200.0, 20) == 4
    assert ticks_from_ms(500.0, 20) == 10
    assert ticks_from_ms(49.0, 20) == 0
    assert ticks_from_ms(50.0, 20) == 1
    assert ticks_from_ms(0.0, 20) == 0
    assert ticks_from_ms(100.0, 40) == 4


def test_ticks_from_ms_validation():
    with pytest.raises(ValueError):
        ticks_from_ms(-1.0, 20)
    with pytest.raises(ValueError):
        ticks_from_ms(100.0, 0)


def test_immediate_mode_is_passthrough():
    buf = ActionBuffer(mode="immediate")
    for t, a in enumerate(seq(20)):
        assert buf.push_then_pop(a, t) is a


def test_fixed_mode_shifts_by_delay():
    delay = 4
    buf = ActionBuffer(mode="fixed", delay_ticks=delay)
    for t, a in enumerate(seq(30)):
        applied = buf.push_then_pop(a, t)
        if t < delay:
            assert applied is buf.warmup_action
        else:
            assert applied.created_tick == t - delay


def test_fixed_mode_property_randomized():
    rng = RandomStream(77)
    for _ in range(60):
        delay = rng.randint(0, 50)
        n = delay + rng.randint(1, 40)
        buf = ActionBuffer(mode="fixed", delay_ticks=delay)
        for t, a in enumerate(seq(n)):
            applied = buf.push_then_pop(a, t)
            want = t - delay if t >= delay else None
            if want is None:
                assert applied is buf.warmup_action
            else:
                assert applied.created_tick == want


def test_fixed_zero_delay_equals_immediate():
    buf = ActionBuffer(mode="fixed", delay_ticks=0)
    for t, a in enumerate(seq(10)):
        assert buf.push_then_pop(a, t) is a


def test_warmup_action_default_is_stop():
    buf = ActionBuffer(mode="fixed", delay_ticks=2)
    warm = buf.push_then_pop(seq(1)[0], 0)
    assert (warm.throttle, warm.brake, warm.steer) == (0.0, 1.0, 0.0)


def test_warmup_action_override():
    idle = Action(throttle=0.0, brake=0.0, steer=0.0)
    buf = ActionBuffer(mode="fixed", delay_ticks=3, warmup_action=idle)
    assert buf.push_then_pop(seq(1)[0], 0) is idle


def test_buffer_validation():
    with pytest.raises(ValueError):
        ActionBuffer(mode="nope")
    with pytest.raises(ValueError):
        ActionBuffer(mode="fixed", delay_ticks=-1)


def test_realtime_fast_commands_land_same_tick():
    buf = ActionBuffer(mode="realtime", rate_hz=20)
    for t, a in enumerate(seq(10)):
        assert buf.realtime_apply(a, 30.0, t) is a


def test_realtime_slow_commands_hold_last_applied():
    buf = ActionBuffer(mode="realtime", rate_hz=20)
    actions = seq(8)
    applied = [buf.realtime_apply(a, 120.0, t) for t, a in enumerate(actions)]
    # 120 ms at 20 Hz lands 2 ticks late; before anything lands the warmup
    # command is held.
    assert applied[0] is buf.warmup_action
    assert applied[1] is buf.warmup_action
    for t in range(2, 8):
        assert applied[t].created_tick == t - 2


def test_realtime_newest_landed_wins():
    buf = ActionBuffer(mode="realtime", rate_hz=20)
    a0, a1, a2 = seq(3)
    assert buf.realtime_apply(a0, 120.0, 0) is buf.warmup_action  # lands at 2
    assert buf.realtime_apply(a1, 55.0, 1) is buf.warmup_action  # lands at 2
    # both land at tick 2; the newer command a1 wins and a0 is dropped
    assert buf.realtime_apply(a2, 120.0, 2) is a1


def test_realtime_stale_landed_commands_are_dropped():
    buf = ActionBuffer(mode="realtime", rate_hz=20)
    a0, a1, a2, a3 = seq(4)
    buf.realtime_apply(a0, 30.0, 0)
    buf.realtime_apply(a1, 200.0, 1)  # would land at 5
    buf.realtime_apply(a2, 30.0, 2)
    out = buf.realtime_apply(a3, 30.0, 3)
    assert out is a3
    # a1 finally lands at 5 but a3 was applied later; it must not regress
    assert buf.realtime_apply(seq(1, start=4)[0], 200.0, 4) is a3


def test_realtime_validation():
    buf = ActionBuffer(mode="realtime", rate_hz=20)
    with pytest.raises(ValueError):
        buf.realtime_apply(seq(1)[0], -5.0, 0)
    with pytest.raises(RuntimeError):
        buf.push_then_pop(seq(1)[0], 0)
    fixed = ActionBuffer(mode="fixed", delay_ticks=1)
    with pytest.raises(RuntimeError):
        fixed.realtime_apply(seq(1)[0], 10.0, 0)


def test_mode_consistency_on_whole_period_trace():
    """A constant measured time of n whole tick periods makes realtime mode
    reproduce fixed mode with delay n once past warmup."""
    rate = 20
    for mult in (2, 4, 10):
        ms = mult * 1000.0 / rate
        delay = ticks_from_ms(ms, rate)
        fixed = ActionBuffer(mode="fixed", delay_ticks=delay, rate_hz=rate)
        realtime = ActionBuffer(mode="realtime", rate_hz=rate)
        for t, a in enumerate(seq(50)):
            fa = fixed.push_then_pop(a, t)
            ra = realtime.realtime_apply(a, ms, t)
            if t >= delay:
                assert fa.created_tick == ra.created_tick


def test_load_latency_trace(tmp_path):
    p = tmp_path / "trace.txt"
    p.write_text("# comment\n30.0\n\n120.5\n  45 \n", encoding="utf-8")
    assert load_latency_trace(p) == [30.0, 120.5, 45.0]
