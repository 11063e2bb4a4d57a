"""Regular four-way signalized intersections and left-turn trajectories.

All geometry lives in a local East-North metric frame centered on the
intersection (x east, y north, meters); no geographic coordinates enter the
simulator.  Right-hand traffic.  Headings name the compass leg a cyclist
enters from, so a cyclist "from S" rides northbound.

Two left-turn styles are synthesized: the *direct* turn sweeps through the
conflict area like a car on a cubic Bezier; the *indirect* turn crosses
straight, waits at the far corner, and crosses again once the perpendicular
axis turns green.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError

HEADINGS = ("N", "E", "S", "W")
#: left-turn exit leg per entry heading (entering from S rides north and
#: leaves westbound on the W leg)
LEFT_EXIT = {"S": "W", "W": "N", "N": "E", "E": "S"}
THROUGH_EXIT = {"S": "N", "N": "S", "E": "W", "W": "E"}
AXIS_OF = {"N": "NS", "S": "NS", "E": "EW", "W": "EW"}

#: outward unit vector of each leg
_OUT = {"N": (0.0, 1.0), "E": (1.0, 0.0), "S": (0.0, -1.0), "W": (-1.0, 0.0)}

BIKE_LANE_WIDTH = 1.5
CROSSWALK_WIDTH = 3.0
WAIT_NODE_PAST_CROSSWALK = 1.5
WAIT_NODE_CURB_OFFSET = 1.0
BEZIER_SAMPLE_STEP = 0.5  # m

DIRECT = "direct"
INDIRECT = "indirect"
THROUGH = "through"


def _right_of(d: tuple[float, float]) -> tuple[float, float]:
    return (d[1], -d[0])


@dataclass(frozen=True)
class Approach:
    heading: str
    lane_count: int = 1
    lane_width: float = 3.5
    approach_length: float = 100.0
    has_bike_lane: bool = False

    @property
    def half_width(self) -> float:
        """Roadway half-width contributed to the crossing conflict area."""
        w = self.lane_count * self.lane_width
        if self.has_bike_lane:
            w += BIKE_LANE_WIDTH
        return w

    @property
    def ride_offset(self) -> float:
        """Lateral offset of the cyclist riding line from the road centerline."""
        if self.has_bike_lane:
            return self.lane_count * self.lane_width + BIKE_LANE_WIDTH / 2.0
        return (self.lane_count - 0.5) * self.lane_width


@dataclass(frozen=True)
class Phase:
    axis: str  # "NS" or "EW"
    green: float  # s
    all_red: float = 0.0  # s tacked onto the end of the phase


@dataclass(frozen=True)
class SignalPlan:
    phases: tuple[Phase, ...]

    def __post_init__(self) -> None:
        if not self.phases:
            raise InvalidGeometryError("signal plan needs at least one phase")
        for ph in self.phases:
            if ph.axis not in ("NS", "EW"):
                raise InvalidGeometryError(f"unknown signal axis {ph.axis!r}")
            if ph.green <= 0 or ph.all_red < 0:
                raise InvalidGeometryError(f"bad phase durations {ph}")

    @property
    def cycle(self) -> float:
        return sum(ph.green + ph.all_red for ph in self.phases)


def default_signal_plan() -> SignalPlan:
    """60 s two-phase plan: 27 s green + 3 s all-red per axis."""
    return SignalPlan((Phase("NS", 27.0, 3.0), Phase("EW", 27.0, 3.0)))


@dataclass(frozen=True)
class AxisState:
    green: bool
    remaining_green: float  # s of green left in the current phase, else 0


def signal_state(plan: SignalPlan, t: float) -> dict[str, AxisState]:
    """Fixed-time control state at time t; periodic with the plan cycle.

    During all-red windows no axis is green.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    tau = math.fmod(t, plan.cycle)
    start = 0.0
    for ph in plan.phases:
        if tau < start + ph.green:
            rem = start + ph.green - tau
            return {
                axis: AxisState(axis == ph.axis, rem if axis == ph.axis else 0.0)
                for axis in ("NS", "EW")
            }
        if tau < start + ph.green + ph.all_red:
            return {axis: AxisState(False, 0.0) for axis in ("NS", "EW")}
        start += ph.green + ph.all_red
    # fmod rounding can land exactly on the cycle boundary
    return signal_state(plan, 0.0)


@dataclass
class Trajectory:
    """Polyline through the intersection with annotated waypoints."""

    kind: str
    polyline: np.ndarray  # (n, 2) meters
    stop_line_index: int = 0
    waiting_node_index: int | None = None
    entry_heading: str = ""

    @property
    def arc_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.polyline, axis=0), axis=1)))


@dataclass
class Network:
    approaches: dict[str, Approach]
    signal: SignalPlan
    half_x: float = field(init=False)  # conflict half-extent east-west
    half_y: float = field(init=False)  # conflict half-extent north-south
    crosswalk_width: float = CROSSWALK_WIDTH

    def __post_init__(self) -> None:
        if sorted(self.approaches) != sorted(HEADINGS):
            raise InvalidGeometryError(f"need one approach per heading, got {sorted(self.approaches)}")
        for h, ap in self.approaches.items():
            if ap.heading != h:
                raise InvalidGeometryError(f"approach under key {h} has heading {ap.heading}")
            if ap.lane_count < 1:
                raise InvalidGeometryError(f"{h}: lane_count must be >= 1")
            if ap.lane_width <= 0 or ap.approach_length <= 0:
                raise InvalidGeometryError(f"{h}: non-positive dimensions")
        self.half_x = max(self.approaches["N"].half_width, self.approaches["S"].half_width)
        self.half_y = max(self.approaches["E"].half_width, self.approaches["W"].half_width)

    # --- geometry helpers -------------------------------------------------

    def stop_line_distance(self, heading: str) -> float:
        """Distance from the center to the stop line of an approach."""
        half_along = self.half_y if AXIS_OF[heading] == "NS" else self.half_x
        return half_along + self.crosswalk_width

    def entry_point(self, heading: str) -> np.ndarray:
        """Stop-line point on the riding line of an approach."""
        ap = self.approaches[heading]
        o = np.array(_OUT[heading])
        r = np.array(_right_of((-o[0], -o[1])))
        return o * self.stop_line_distance(heading) + r * ap.ride_offset

    def exit_point(self, heading: str) -> np.ndarray:
        """Point where outbound riders leave the intersection on a leg."""
        ap = self.approaches[heading]
        o = np.array(_OUT[heading])
        r = np.array(_right_of(tuple(o)))
        return o * self.stop_line_distance(heading) + r * ap.ride_offset

    def spawn_point(self, heading: str) -> np.ndarray:
        ap = self.approaches[heading]
        o = np.array(_OUT[heading])
        r = np.array(_right_of((-o[0], -o[1])))
        return o * (self.stop_line_distance(heading) + ap.approach_length) + r * ap.ride_offset

    def waiting_node(self, heading: str) -> np.ndarray:
        """Far-corner refuge for the two-stage turn from an approach."""
        ap = self.approaches[heading]
        o = np.array(_OUT[heading])
        d = -o
        r = np.array(_right_of(tuple(d)))
        dist = self.stop_line_distance(heading) + WAIT_NODE_PAST_CROSSWALK
        return d * dist + r * (ap.ride_offset + WAIT_NODE_CURB_OFFSET)

    def conflict_bounds(self, inflate: float = 0.0) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the conflict area, optionally inflated."""
        return (
            -self.half_x - inflate,
            self.half_x + inflate,
            -self.half_y - inflate,
            self.half_y + inflate,
        )


def build_four_way(approaches: list[Approach], signal: SignalPlan) -> Network:
    """Assemble a regular four-way intersection from its four approaches."""
    if len(approaches) != 4:
        raise InvalidGeometryError(f"need exactly 4 approaches, got {len(approaches)}")
    return Network(approaches={ap.heading: ap for ap in approaches}, signal=signal)


# ---------------------------------------------------------------------------
# Trajectory synthesis
# ---------------------------------------------------------------------------

def _cubic_bezier(p0, p1, p2, p3, n: int = 256) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (
        (1 - t) ** 3 * p0
        + 3 * (1 - t) ** 2 * t * p1
        + 3 * (1 - t) * t**2 * p2
        + t**3 * p3
    )


def _resample(poly: np.ndarray, step: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    s = np.arange(0.0, total, step)
    s = np.append(s, total)
    x = np.interp(s, cum, poly[:, 0])
    y = np.interp(s, cum, poly[:, 1])
    return np.column_stack([x, y])


def synthesize_direct_turn(net: Network, from_heading: str) -> Trajectory:
    """Car-style left turn: one smooth sweep through the conflict area.

    Cubic Bezier anchored at the stop line and the exit point, interior
    control points at 40 % of the chord along the entry and exit tangents,
    sampled at 0.5 m.
    """
    exit_heading = LEFT_EXIT[from_heading]
    p0 = net.entry_point(from_heading)
    p3 = net.exit_point(exit_heading)
    d_in = -np.array(_OUT[from_heading])
    d_out = np.array(_OUT[exit_heading])
    chord = float(np.linalg.norm(p3 - p0))
    p1 = p0 + 0.4 * chord * d_in
    p2 = p3 - 0.4 * chord * d_out
    poly = _resample(_cubic_bezier(p0, p1, p2, p3), BEZIER_SAMPLE_STEP)
    return Trajectory(kind=DIRECT, polyline=poly, stop_line_index=0, entry_heading=from_heading)


def synthesize_indirect_turn(net: Network, from_heading: str) -> Trajectory:
    """Pedestrian-style two-stage turn: cross, wait at the far corner, cross.

    The single waiting node is annotated so the simulator can hold the
    cyclist there until the perpendicular axis turns green.
    """
    exit_heading = LEFT_EXIT[from_heading]
    p0 = net.entry_point(from_heading)
    node = net.waiting_node(from_heading)
    p_exit = net.exit_point(exit_heading)
    poly = np.array([p0, node, p_exit])
    return Trajectory(
        kind=INDIRECT,
        polyline=poly,
        stop_line_index=0,
        waiting_node_index=1,
        entry_heading=from_heading,
    )


def synthesize_through(net: Network, from_heading: str) -> Trajectory:
    """Straight crossing onto the opposite leg (background traffic)."""
    exit_heading = THROUGH_EXIT[from_heading]
    poly = np.array([net.entry_point(from_heading), net.exit_point(exit_heading)])
    return Trajectory(kind=THROUGH, polyline=poly, stop_line_index=0, entry_heading=from_heading)


# ---------------------------------------------------------------------------
# Routes: full spawn-to-exit paths for the simulator
# ---------------------------------------------------------------------------

@dataclass
class Route:
    """A trajectory extended over the whole approach and exit legs."""

    kind: str
    entry_heading: str
    entry_axis: str
    polyline: np.ndarray
    cum_s: np.ndarray  # cumulative arc length per vertex
    s_stop: float  # stop line position
    s_node: float | None  # waiting node position (indirect only)
    s_region_in: float  # measurement-region entry
    s_region_out: float  # measurement-region exit
    s_end: float

    def position(self, s: float) -> tuple[float, float]:
        x = float(np.interp(s, self.cum_s, self.polyline[:, 0]))
        y = float(np.interp(s, self.cum_s, self.polyline[:, 1]))
        return x, y


def _segment_box_overlap(p, q, bounds) -> tuple[float, float] | None:
    """Liang-Barsky clip of segment p->q against an axis-aligned box.

    Returns the parameter interval [t0, t1] within [0, 1] that lies inside,
    or None.
    """
    xmin, xmax, ymin, ymax = bounds
    t0, t1 = 0.0, 1.0
    for lo, hi, a, b in ((xmin, xmax, p[0], q[0]), (ymin, ymax, p[1], q[1])):
        delta = b - a
        if delta == 0.0:
            if a < lo or a > hi:
                return None
            continue
        ta, tb = (lo - a) / delta, (hi - a) / delta
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def region_interval(polyline: np.ndarray, cum_s: np.ndarray, bounds) -> tuple[float, float]:
    """Arc-length span of a polyline inside a box: first entry to last exit."""
    s_in, s_out = None, None
    for i in range(len(polyline) - 1):
        hit = _segment_box_overlap(polyline[i], polyline[i + 1], bounds)
        if hit is None:
            continue
        ds = cum_s[i + 1] - cum_s[i]
        lo = cum_s[i] + hit[0] * ds
        hi = cum_s[i] + hit[1] * ds
        s_in = lo if s_in is None else min(s_in, lo)
        s_out = hi if s_out is None else max(s_out, hi)
    if s_in is None:
        raise InvalidGeometryError("trajectory never enters the measurement region")
    return s_in, s_out


def build_route(
    net: Network, from_heading: str, kind: str, region_inflate: float = 5.0
) -> Route:
    """Compose spawn leg + synthesized trajectory + exit run-out."""
    if kind == DIRECT:
        traj = synthesize_direct_turn(net, from_heading)
        exit_heading = LEFT_EXIT[from_heading]
    elif kind == INDIRECT:
        traj = synthesize_indirect_turn(net, from_heading)
        exit_heading = LEFT_EXIT[from_heading]
    elif kind == THROUGH:
        traj = synthesize_through(net, from_heading)
        exit_heading = THROUGH_EXIT[from_heading]
    else:
        raise ValueError(f"unknown trajectory kind {kind!r}")

    spawn = net.spawn_point(from_heading)
    exit_ap = net.approaches[exit_heading]
    out_dir = np.array(_OUT[exit_heading])
    run_out = traj.polyline[-1] + out_dir * exit_ap.approach_length

    poly = np.vstack([spawn, traj.polyline, run_out])
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum_s = np.concatenate([[0.0], np.cumsum(seg)])

    # indices shift by one for the prepended spawn vertex
    s_stop = float(cum_s[traj.stop_line_index + 1])
    s_node = (
        float(cum_s[traj.waiting_node_index + 1]) if traj.waiting_node_index is not None else None
    )
    s_in, s_out = region_interval(poly, cum_s, net.conflict_bounds(region_inflate))
    return Route(
        kind=kind,
        entry_heading=from_heading,
        entry_axis=AXIS_OF[from_heading],
        polyline=poly,
        cum_s=cum_s,
        s_stop=s_stop,
        s_node=s_node,
        s_region_in=s_in,
        s_region_out=s_out,
        s_end=float(cum_s[-1]),
    )
