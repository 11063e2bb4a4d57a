"""Intersection geometry, trajectory synthesis, and fixed-time signals."""

import numpy as np
import pytest

from cyclesim.errors import InvalidGeometryError
from cyclesim.network import (
    DIRECT,
    HEADINGS,
    INDIRECT,
    THROUGH,
    Approach,
    Network,
    Phase,
    SignalPlan,
    build_four_way,
    build_route,
    default_signal_plan,
    signal_state,
    synthesize_direct_turn,
    synthesize_indirect_turn,
    synthesize_through,
)

from helpers import make_network


def test_symmetric_two_lane_conflict_square():
    net = make_network(lanes=2, lane_width=3.5)
    xmin, xmax, ymin, ymax = net.conflict_bounds()
    assert xmax - xmin == pytest.approx(14.0)
    assert ymax - ymin == pytest.approx(14.0)


def test_zero_lane_count_rejected():
    approaches = [Approach(h, lane_count=2) for h in HEADINGS[:-1]]
    approaches.append(Approach("W", lane_count=0))
    with pytest.raises(InvalidGeometryError):
        build_four_way(approaches, default_signal_plan())


def test_wrong_approach_count_rejected():
    with pytest.raises(InvalidGeometryError):
        build_four_way([Approach("N"), Approach("S")], default_signal_plan())
    with pytest.raises(InvalidGeometryError):
        build_four_way([Approach("N") for _ in range(4)], default_signal_plan())


def test_bike_lane_moves_riding_line_and_waiting_node():
    plain = make_network(lanes=2)
    laned = make_network(lanes=2, bike_lanes=True)
    assert laned.approaches["S"].ride_offset > plain.approaches["S"].ride_offset
    node_plain = plain.waiting_node("S")
    node_laned = laned.waiting_node("S")
    # node sits 1 m curbward of the riding line, which is on the bike lane
    assert node_laned[0] == pytest.approx(laned.approaches["S"].ride_offset + 1.0)
    assert node_laned[0] > node_plain[0]


def test_direct_turn_topology_northbound_exits_west():
    net = make_network()
    traj = synthesize_direct_turn(net, "S")
    start, end = traj.polyline[0], traj.polyline[-1]
    assert np.allclose(start, net.entry_point("S"))
    assert np.allclose(end, net.exit_point("W"))
    assert end[0] < -net.half_x  # on the west leg
    final_dir = traj.polyline[-1] - traj.polyline[-2]
    assert final_dir[0] < 0 and abs(final_dir[1]) < abs(final_dir[0])


def test_direct_turn_smooth_no_kinks():
    net = make_network()
    for heading in HEADINGS:
        seg = np.diff(synthesize_direct_turn(net, heading).polyline, axis=0)
        norms = np.linalg.norm(seg, axis=1)
        cosang = np.sum(seg[1:] * seg[:-1], axis=1) / (norms[1:] * norms[:-1])
        angles = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        assert angles.max() < 30.0


def test_direct_shorter_than_indirect():
    net = make_network()
    for heading in HEADINGS:
        direct = synthesize_direct_turn(net, heading)
        indirect = synthesize_indirect_turn(net, heading)
        assert direct.arc_length < indirect.arc_length


def test_indirect_exceeds_direct_by_over_twenty_percent():
    net = make_network(lanes=2, lane_width=3.5)  # the 14 m conflict square
    direct = synthesize_direct_turn(net, "S")
    indirect = synthesize_indirect_turn(net, "S")
    assert indirect.arc_length > 1.2 * direct.arc_length


def test_indirect_has_exactly_one_waiting_node_at_far_corner():
    net = make_network()
    traj = synthesize_indirect_turn(net, "S")
    assert traj.waiting_node_index is not None
    node = traj.polyline[traj.waiting_node_index]
    # northbound entry waits at the NE far corner, past the far crosswalk
    assert node[0] > 0 and node[1] > net.half_y + net.crosswalk_width
    assert sum(1 for _ in [traj.waiting_node_index]) == 1


def test_direct_and_indirect_share_start_points():
    net = make_network()
    for heading in HEADINGS:
        d = synthesize_direct_turn(net, heading)
        i = synthesize_indirect_turn(net, heading)
        assert np.allclose(d.polyline[0], i.polyline[0])


def test_trajectory_endpoints_on_lane_centerlines():
    net = make_network(lanes=3, lane_width=3.0)
    for heading in HEADINGS:
        for kind, synth in ((DIRECT, synthesize_direct_turn), (INDIRECT, synthesize_indirect_turn)):
            traj = synth(net, heading)
            assert np.linalg.norm(traj.polyline[0] - net.entry_point(heading)) < 0.1
    through = synthesize_through(net, "E")
    assert np.allclose(through.polyline[0], net.entry_point("E"))
    assert np.allclose(through.polyline[-1], net.exit_point("W"))


_ROT_NEXT = {"N": "E", "E": "S", "S": "W", "W": "N"}


def _rot90_cw(points: np.ndarray) -> np.ndarray:
    # the plane rotation taking north onto east
    return np.column_stack([points[:, 1], -points[:, 0]])


def test_rotating_approaches_rotates_trajectories():
    base = {h: Approach(h, lane_count=1 + i, lane_width=3.0 + 0.2 * i) for i, h in enumerate(HEADINGS)}
    net = Network(approaches=base, signal=default_signal_plan())
    rotated_aps = {
        _ROT_NEXT[h]: Approach(
            _ROT_NEXT[h], ap.lane_count, ap.lane_width, ap.approach_length, ap.has_bike_lane
        )
        for h, ap in base.items()
    }
    net_rot = Network(approaches=rotated_aps, signal=default_signal_plan())
    for heading in HEADINGS:
        for synth in (synthesize_direct_turn, synthesize_indirect_turn, synthesize_through):
            orig = synth(net, heading).polyline
            rot = synth(net_rot, _ROT_NEXT[heading]).polyline
            assert np.allclose(_rot90_cw(orig), rot, atol=1e-9)


def _max_distance_to_polyline(points: np.ndarray, poly: np.ndarray) -> float:
    worst = 0.0
    a, b = poly[:-1], poly[1:]
    ab = b - a
    denom = np.sum(ab * ab, axis=1)
    for p in points:
        t = np.clip(np.sum((p - a) * ab, axis=1) / denom, 0.0, 1.0)
        closest = a + t[:, None] * ab
        worst = max(worst, float(np.min(np.linalg.norm(closest - p, axis=1))))
    return worst


def test_mirrored_intersection_mirrors_trajectories():
    # on a fully symmetric intersection, reflecting east <-> west maps the
    # turn entering from E onto the reversed turn entering from S (same
    # curve, sampled from the other end)
    net = make_network()
    e_turn = synthesize_direct_turn(net, "E").polyline
    s_turn = synthesize_direct_turn(net, "S").polyline
    mirrored = np.column_stack([-e_turn[:, 0], e_turn[:, 1]])[::-1]
    assert np.allclose(mirrored[0], s_turn[0]) and np.allclose(mirrored[-1], s_turn[-1])
    assert _max_distance_to_polyline(mirrored, s_turn) < 0.01


# --- signals -------------------------------------------------------------------

def test_signal_first_phase_green_at_zero():
    state = signal_state(default_signal_plan(), 0.0)
    assert state["NS"].green and not state["EW"].green
    assert state["NS"].remaining_green == pytest.approx(27.0)


def test_signal_periodic_over_cycle():
    plan = default_signal_plan()
    for t in (0.0, 5.0, 29.0, 31.0, 59.0):
        a = signal_state(plan, t)
        b = signal_state(plan, t + plan.cycle)
        assert a == b


def test_signal_all_red_window():
    plan = default_signal_plan()
    for t in (27.0, 28.5, 29.9, 57.0, 59.9):
        state = signal_state(plan, t)
        assert not state["NS"].green and not state["EW"].green


def test_signal_at_most_one_axis_green():
    plan = SignalPlan((Phase("NS", 10.0, 2.0), Phase("EW", 20.0, 0.0), Phase("NS", 5.0, 3.0)))
    for t in np.arange(0.0, plan.cycle * 2, 0.25):
        state = signal_state(plan, t)
        assert not (state["NS"].green and state["EW"].green)


def test_signal_plan_validation():
    with pytest.raises(InvalidGeometryError):
        SignalPlan(())
    with pytest.raises(InvalidGeometryError):
        SignalPlan((Phase("NS", 0.0, 3.0),))
    with pytest.raises(InvalidGeometryError):
        SignalPlan((Phase("XX", 10.0, 0.0),))


# --- routes ----------------------------------------------------------------------

def test_route_composition_and_region():
    net = make_network(approach_length=100.0)
    route = build_route(net, "S", DIRECT, region_inflate=5.0)
    assert route.s_stop == pytest.approx(100.0)
    assert route.s_region_in == pytest.approx(route.s_stop - 2.0)  # 2 m before the line
    assert route.s_region_in < route.s_region_out < route.s_end
    assert np.all(np.diff(route.cum_s) > 0)
    x, y = route.position(0.0)
    assert np.allclose((x, y), net.spawn_point("S"))


def test_indirect_route_node_inside_region():
    net = make_network()
    route = build_route(net, "S", INDIRECT, region_inflate=5.0)
    assert route.s_node is not None
    assert route.s_region_in < route.s_node < route.s_region_out


def test_through_route_has_no_node():
    net = make_network()
    route = build_route(net, "N", THROUGH)
    assert route.s_node is None
    assert route.entry_axis == "NS"
