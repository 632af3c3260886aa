"""Regenerate the bundled route suite.

Route geometry and scenario timing are derived from the controller's
braking envelope so that the clean policy passes every route while the
designed failure modes (late braking under latency, missed threats under
camera corruption, overspeed understeer) have deterministic margins.
Usage: python3 tools/gen_routes.py [out_dir]
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from loopbench.routes import RouteEvent, bundled_route_dir, make_route, save_route


def deg(a):
    return math.radians(a)


def walker(trigger_s, cross_s, start_lat, speed):
    return RouteEvent("crossing_actor", trigger_s, {
        "cross_s": cross_s, "start_lat": start_lat, "end_lat": -start_lat,
        "speed": speed, "actor": "walker",
        "half_length": 0.4, "half_width": 0.4})


def crossing_vehicle(trigger_s, cross_s, start_lat, speed):
    return RouteEvent("crossing_actor", trigger_s, {
        "cross_s": cross_s, "start_lat": start_lat, "end_lat": -start_lat,
        "speed": speed, "actor": "vehicle",
        "half_length": 1.1, "half_width": 0.9})


ROUTES = [
    dict(route_id="straight_01", segments=[("straight", 140.0)],
         speed_limit=6.0, time_budget_s=60.0, events=[]),
    dict(route_id="straight_02", segments=[("straight", 200.0)],
         speed_limit=8.0, time_budget_s=60.0, events=[]),
    dict(route_id="curve_01",
         segments=[("straight", 30.0), ("arc", 20.0, deg(90)),
                   ("straight", 30.0)],
         speed_limit=5.0, time_budget_s=60.0, events=[]),
    dict(route_id="curve_02",
         segments=[("straight", 25.0), ("arc", 14.0, deg(-120)),
                   ("straight", 25.0)],
         speed_limit=5.0, time_budget_s=90.0, events=[]),
    dict(route_id="scurve_01",
         segments=[("straight", 20.0), ("arc", 18.0, deg(60)),
                   ("straight", 8.0), ("arc", 18.0, deg(-60)),
                   ("straight", 20.0)],
         speed_limit=5.0, time_budget_s=60.0, events=[]),
    dict(route_id="scurve_02",
         segments=[("straight", 15.0), ("arc", 22.0, deg(-75)),
                   ("straight", 10.0), ("arc", 16.0, deg(50)),
                   ("straight", 15.0)],
         speed_limit=6.0, time_budget_s=60.0, events=[]),
    # stop line at 50 m turns red at 4 s: the camera policy holds and waits,
    # a camera-blind policy arrives around 9.5 s and runs the light
    dict(route_id="signal_01", segments=[("straight", 120.0)],
         speed_limit=6.0, time_budget_s=75.0,
         events=[RouteEvent("red_light", 50.0,
                            {"red_from_s": 4.0, "red_to_s": 16.0})]),
    # red phase starts only after every policy has already crossed
    dict(route_id="signal_02", segments=[("straight", 120.0)],
         speed_limit=6.0, time_budget_s=75.0,
         events=[RouteEvent("red_light", 45.0,
                            {"red_from_s": 12.0, "red_to_s": 24.0})]),
    # walker exposure first, then a lead vehicle that stops in-lane; the
    # long pause keeps the lead stationary for any plausible arrival time
    dict(route_id="lead_01", segments=[("straight", 170.0)],
         speed_limit=8.0, time_budget_s=90.0,
         events=[walker(10.0, 50.0, 11.0, 2.2),
                 RouteEvent("lead_vehicle", 60.0,
                            {"speed": 4.0, "stop_s": 110.0,
                             "pause_s": 12.0})]),
    dict(route_id="lead_02", segments=[("straight", 180.0)],
         speed_limit=8.0, time_budget_s=90.0,
         events=[walker(12.0, 52.0, -11.0, 2.2),
                 RouteEvent("lead_vehicle", 70.0,
                            {"speed": 3.5, "stop_s": 120.0,
                             "pause_s": 12.0})]),
    # three staggered walker crossings; each trigger sits past the previous
    # cross line so the exposure arms with the ego back at cruise speed
    dict(route_id="cross_01", segments=[("straight", 140.0)],
         speed_limit=5.0, time_budget_s=90.0,
         events=[walker(10.0, 45.0, 17.3, 2.475),
                 walker(52.0, 87.0, -17.3, 2.475),
                 walker(94.0, 129.0, 17.3, 2.475)]),
    # slow crossing vehicles with wider collision extents
    dict(route_id="cross_02", segments=[("straight", 145.0)],
         speed_limit=5.0, time_budget_s=90.0,
         events=[crossing_vehicle(8.0, 44.0, -19.2, 2.667),
                 crossing_vehicle(52.0, 88.0, 19.2, 2.667),
                 crossing_vehicle(96.0, 132.0, -19.2, 2.667)]),
]


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else bundled_route_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    for kwargs in ROUTES:
        route = make_route(**kwargs)
        path = out_dir / f"{route.route_id}.yaml"
        save_route(route, path)
        print(f"{path} length={route.length:.1f}m "
              f"budget={route.time_budget}t events={len(route.events)}")


if __name__ == "__main__":
    main()
