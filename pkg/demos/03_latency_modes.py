"""
Action-path latency modes
=========================

The action buffer sits between the policy and the simulator and delays
*when* a command executes, never what it says. This script walks the
three modes on a hand-made command sequence, then shows what a 500 ms
delay does to a scored rollout.
"""

from loopbench import (
    ActionBuffer, load_route_suite, preset_settings, run_route,
    setting_by_label, ticks_from_ms,
)
from loopbench.core import Action
from loopbench.metrics import driving_score

# Millisecond levels quantize to whole ticks at the simulation rate.

for ms in (100.0, 200.0, 500.0):
    print("%.0f ms at 20 Hz -> %d ticks" % (ms, ticks_from_ms(ms, 20)))


def throttle_seq(n):
    return [Action(throttle=0.1 * t, brake=0.0, steer=0.0) for t in range(n)]


# Immediate mode is a pass-through: tick t executes the tick-t command.

buf = ActionBuffer(mode="immediate")
applied = [buf.push_then_pop(a, t) for t, a in enumerate(throttle_seq(6))]
print("\nimmediate:", [round(a.throttle, 1) for a in applied])

# Fixed mode shifts the whole sequence by delay_ticks, padding the first
# ticks with the warmup (stop) command.

buf = ActionBuffer(mode="fixed", delay_ticks=4)
applied = [buf.push_then_pop(a, t) for t, a in enumerate(throttle_seq(10))]
print("fixed d=4:", [round(a.throttle, 1) for a in applied])

# Realtime mode schedules each command by a measured inference time.
# Commands that fit inside one 50 ms tick land immediately; a 120 ms
# spike lands floor(120*20/1000) = 2 ticks late while the last applied
# command is held.

buf = ActionBuffer(mode="realtime", rate_hz=20)
trace = [30.0, 30.0, 120.0, 120.0, 30.0, 30.0]
applied = [buf.realtime_apply(a, ms, t)
           for t, (a, ms) in enumerate(zip(throttle_seq(6), trace))]
print("realtime :", [round(a.throttle, 1) for a in applied],
      "for trace", trace)

# Closed loop, the delay erodes the stopping margin in front of scripted
# hazards. Compare the clean score against the 500 ms preset on a route
# with crossing traffic.

routes = load_route_suite()
route = next(r for r in routes if r.route_id == "cross_01")
clean = run_route("full-pursuit", route, setting_by_label("clean"), seed=0)
late = run_route("full-pursuit", route,
                 setting_by_label("latency_500ms"), seed=0)
print("\n%s clean  DS %.2f  infractions %s"
      % (route.route_id, driving_score(clean), clean.infraction_counts()))
print("%s 500ms  DS %.2f  infractions %s"
      % (route.route_id, driving_score(late), late.infraction_counts()))

# The preset grid used by the sweep includes three latency levels.

labels = [s.label for s in preset_settings() if s.is_latency]
print("\nlatency presets:", labels)
