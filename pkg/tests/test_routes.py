import math

import numpy as np
import pytest

from loopbench.routes import (
    ROUTE_SCHEMA_VERSION,
    RouteEvent,
    RouteSpec,
    build_centerline,
    load_route,
    load_route_suite,
    make_route,
    route_by_id,
    route_from_dict,
    save_route,
)


def test_build_centerline_straight():
    pts = build_centerline([("straight", 50.0)])
    assert pts[0].tolist() == [0.0, 0.0]
    assert pts[-1].tolist() == pytest.approx([50.0, 0.0])


def test_build_centerline_left_arc():
    # quarter circle of radius 10 turning left ends at (10, 10) heading +y
    pts = build_centerline([("arc", 10.0, math.pi / 2)], step=0.1)
    assert pts[-1].tolist() == pytest.approx([10.0, 10.0], abs=1e-6)


def test_build_centerline_right_arc():
    pts = build_centerline([("arc", 10.0, -math.pi / 2)], step=0.1)
    assert pts[-1].tolist() == pytest.approx([10.0, -10.0], abs=1e-6)


def test_build_centerline_unknown_segment():
    with pytest.raises(ValueError):
        build_centerline([("spiral", 1.0)])


def test_arc_length_matches_radius_sweep():
    route = make_route("t", [("arc", 20.0, math.pi / 2)], 5.0, 60.0)
    assert route.length == pytest.approx(20.0 * math.pi / 2, rel=1e-3)


def test_make_route_budget_in_ticks():
    route = make_route("t", [("straight", 10.0)], 5.0, 30.0, rate_hz=20)
    assert route.time_budget == 600


def test_route_spec_validation():
    with pytest.raises(ValueError):
        RouteSpec(route_id="bad", centerline=np.array([[0.0, 0.0]]),
                  speed_limit=5.0, time_budget=100)
    with pytest.raises(ValueError):
        RouteSpec(route_id="bad",
                  centerline=np.array([[0.0, 0.0], [0.0, 0.0]]),
                  speed_limit=5.0, time_budget=100)


def test_event_trigger_must_lie_on_route():
    ev = RouteEvent(kind="static_prop", trigger_s=999.0, params={"lat": 0.0})
    with pytest.raises(ValueError):
        make_route("t", [("straight", 10.0)], 5.0, 30.0, events=[ev])


def test_event_kind_validated():
    with pytest.raises(ValueError):
        RouteEvent(kind="meteor", trigger_s=1.0)


def test_point_tangent_heading():
    route = make_route("t", [("straight", 40.0)], 5.0, 30.0)
    assert route.point_at(10.0) == pytest.approx((10.0, 0.0))
    assert route.tangent_at(3.0) == pytest.approx((1.0, 0.0))
    assert route.heading_at(3.0) == pytest.approx(0.0)


def test_project_on_and_off_line():
    route = make_route("t", [("straight", 40.0)], 5.0, 30.0)
    s, lat = route.project(12.0, 0.0, 0.0)
    assert s == pytest.approx(12.0, abs=1e-6)
    assert lat == pytest.approx(0.0, abs=1e-9)
    # left of the travel direction is positive lateral offset
    s, lat = route.project(12.0, 2.0, 0.0)
    assert lat == pytest.approx(2.0, abs=1e-6)
    s, lat = route.project(12.0, -2.0, 0.0)
    assert lat == pytest.approx(-2.0, abs=1e-6)


def test_points_at_clamps():
    route = make_route("t", [("straight", 40.0)], 5.0, 30.0)
    assert route.points_at(500.0).tolist() == pytest.approx([40.0, 0.0])
    assert route.points_at(-5.0).tolist() == pytest.approx([0.0, 0.0])


def test_yaml_round_trip(tmp_path):
    ev = RouteEvent(kind="red_light", trigger_s=20.0,
                    params={"red_from_s": 2.0, "red_to_s": 8.0})
    route = make_route("rt", [("straight", 30.0), ("arc", 10.0, 1.0)],
                       6.0, 45.0, events=[ev])
    path = tmp_path / "rt.yaml"
    save_route(route, path)
    loaded = load_route(path)
    assert loaded.route_id == "rt"
    assert loaded.speed_limit == 6.0
    assert loaded.time_budget == route.time_budget
    assert loaded.length == pytest.approx(route.length, abs=0.05)
    assert len(loaded.events) == 1
    assert loaded.events[0].kind == "red_light"
    assert loaded.events[0].params == {"red_from_s": 2.0, "red_to_s": 8.0}


def test_route_from_dict_rejects_unknown_schema():
    with pytest.raises(ValueError):
        route_from_dict({"schema_version": ROUTE_SCHEMA_VERSION + 1,
                         "id": "x", "speed_limit": 5.0,
                         "time_budget_s": 10.0,
                         "centerline": [[0, 0], [1, 0]]})


def test_bundled_suite():
    routes = load_route_suite()
    ids = [r.route_id for r in routes]
    assert len(routes) == 12
    assert ids == sorted(ids)
    families = {"straight", "curve", "scurve", "signal", "lead", "cross"}
    for r in routes:
        assert r.route_id.rsplit("_", 1)[0] in families
        assert r.length > 0
        assert r.time_budget > 0


def test_route_by_id():
    assert route_by_id("straight_01").route_id == "straight_01"
    with pytest.raises(KeyError):
        route_by_id("nope_99")


def test_load_route_suite_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_route_suite(tmp_path / "empty")
