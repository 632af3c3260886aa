"""
Closed-loop rollout on a single route
=====================================

Drive the full-pursuit policy around one bundled route with no
perturbations and inspect what the harness records along the way.
"""

from loopbench import CLEAN_SETTING, load_route_suite, run_route
from loopbench.metrics import comfort, driving_score, efficiency

# Load the bundled route suite and pick one curved route.

routes = load_route_suite()
route = next(r for r in routes if r.route_id == "scurve_01")
print("route:", route.route_id)
print("length: %.1f m  speed limit: %.1f m/s  budget: %d ticks"
      % (route.length, route.speed_limit, route.time_budget))

# Run the closed loop. The harness wires world -> observation pipeline
# -> policy -> action buffer -> world on every tick, so whatever the
# policy does feeds back into what it sees next.

result = run_route("full-pursuit", route, CLEAN_SETTING, seed=0)

print()
print("outcome:", result.outcome, "(%s)" % result.finish_reason)
print("completion: %.3f" % result.completion)
print("ticks used: %d of %d" % (result.ticks_used, result.time_budget))

# Infractions are (kind, tick) pairs; a clean run has none.

counts = result.infraction_counts()
if counts:
    for kind in sorted(counts):
        print("infraction %s x%d" % (kind, counts[kind]))
else:
    print("no infractions")

# Scores are pure functions of the result record. The driving score
# multiplies completion by a penalty factor per infraction; efficiency
# compares realised speed against the limit and comfort counts ticks
# inside the accel/jerk envelopes.

print("driving score: %.2f" % driving_score(result))
print("efficiency: %.1f  comfort: %.1f" % (efficiency(result), comfort(result)))
