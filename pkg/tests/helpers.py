"""Shared builders and invariant checkers for the test suite."""

import numpy as np

from cyclesim.network import (
    Approach,
    HEADINGS,
    Network,
    Phase,
    SignalPlan,
    build_route,
    signal_state,
)
from cyclesim.simulation import Scenario, SimConfig, TrajectoryLog, run
from cyclesim.traces import GeoPoint, RideTrace
from cyclesim.geo import EARTH_RADIUS_M

BASE_LAT, BASE_LON = 52.52, 13.405


def make_network(
    lanes: int = 2,
    lane_width: float = 3.5,
    approach_length: float = 100.0,
    green: float = 27.0,
    all_red: float = 3.0,
    bike_lanes: bool = False,
    phases: tuple | None = None,
) -> Network:
    plan = SignalPlan(
        phases
        if phases is not None
        else (Phase("NS", green, all_red), Phase("EW", green, all_red))
    )
    approaches = {
        h: Approach(h, lane_count=lanes, lane_width=lane_width,
                    approach_length=approach_length, has_bike_lane=bike_lanes)
        for h in HEADINGS
    }
    return Network(approaches=approaches, signal=plan)


def make_scenario(lane_only: bool = False, **net_kwargs) -> Scenario:
    return Scenario(network=make_network(**net_kwargs), lane_only=lane_only)


def trace_from_enu(x_m, y_m, period_s: float = 3.0, t0_ms: int = 1_600_000_000_000) -> RideTrace:
    """Build a trace from local east/north meters around the base coordinate."""
    x = np.asarray(x_m, dtype=float)
    y = np.asarray(y_m, dtype=float)
    lat = BASE_LAT + np.degrees(y / EARTH_RADIUS_M)
    lon = BASE_LON + np.degrees(x / (EARTH_RADIUS_M * np.cos(np.radians(BASE_LAT))))
    points = [
        GeoPoint(t0_ms + int(i * period_s * 1000), float(la), float(lo))
        for i, (la, lo) in enumerate(zip(lat, lon))
    ]
    return RideTrace(ride_id="test", points=points)


def straight_trace(speed_ms: float, n_points: int, period_s: float = 3.0) -> RideTrace:
    """Constant-speed straight northbound track."""
    y = np.arange(n_points) * speed_ms * period_s
    return trace_from_enu(np.zeros(n_points), y, period_s)


def min_gap_violations(log: TrajectoryLog, s_stop: float = 100.0) -> list:
    """Pairs of step records violating the min-gap rule on shared lanes.

    Cyclists share a lane when they entered from the same approach and
    either follow the same trajectory kind or are both still before the
    stop line.
    """
    info = {s.cyclist_id: s for s in log.summaries}
    by_t: dict[float, list] = {}
    for r in log.records:
        by_t.setdefault(r.t, []).append(r)
    violations = []
    for t, recs in by_t.items():
        groups: dict[str, list] = {}
        for r in recs:
            groups.setdefault(info[r.cyclist_id].heading, []).append(r)
        for heading, members in groups.items():
            members.sort(key=lambda r: r.s)
            for a, b in zip(members[:-1], members[1:]):
                same_kind = info[a.cyclist_id].kind == info[b.cyclist_id].kind
                both_on_approach = a.s <= s_stop and b.s <= s_stop
                if not (same_kind or both_on_approach):
                    continue
                gap = b.s - 1.8 - a.s  # length 1.8 m, min_gap 0.5 m
                if gap < 0.5 - 1e-6 and b.s > 0.0:
                    violations.append((t, a.cyclist_id, b.cyclist_id, gap))
    return violations


def red_light_crossings(log: TrajectoryLog, net: Network) -> list:
    """Stop-line crossings that began on a red signal for the entry axis."""
    info = {s.cyclist_id: s for s in log.summaries}
    routes = {}
    by_id: dict[int, list] = {}
    for r in log.records:
        by_id.setdefault(r.cyclist_id, []).append(r)
    crossings = []
    for cid, recs in by_id.items():
        summary = info[cid]
        key = (summary.heading, summary.kind)
        if key not in routes:
            routes[key] = build_route(net, summary.heading, summary.kind)
        s_stop = routes[key].s_stop
        axis = routes[key].entry_axis
        recs.sort(key=lambda r: r.t)
        for prev, cur in zip(recs[:-1], recs[1:]):
            if prev.s < s_stop <= cur.s:
                state = signal_state(net.signal, prev.t)
                if not state[axis].green:
                    crossings.append((cid, prev.t))
                break
    return crossings


def quick_run(seed: int, scenario: Scenario | None = None, **cfg_kwargs) -> TrajectoryLog:
    from cyclesim.distributions import DEFAULT_AMAX_BURR, DEFAULT_VMAX_JSU

    scenario = scenario or make_scenario()
    cfg = SimConfig(seed=seed, **cfg_kwargs)
    if cfg.param_source == "fitted":
        return run(scenario, cfg, DEFAULT_AMAX_BURR, DEFAULT_VMAX_JSU)
    return run(scenario, cfg)
