"""Deterministic fixed-step microsimulation of cyclists at one intersection.

Longitudinal dynamics follow the constant-rate model: speed rises by at most
a_max per second toward the per-cyclist desired speed, bounded by a
Krauss-style safe speed toward the leader and toward red stop lines.
Two-stage left-turners hold at their waiting node until the perpendicular
signal axis turns green, then depart with a one-step start-up delay.

Every stochastic draw (arrivals, per-cyclist parameters, turn choices) comes
from its own named PCG64 stream derived from the run seed via
numpy's SeedSequence.spawn, so adding one feature never perturbs another
stream's sequence and runs are reproducible bit for bit.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import BurrXIIParams, JohnsonSUParams
from .errors import InternalInconsistencyError
from .network import (
    DIRECT,
    HEADINGS,
    INDIRECT,
    THROUGH,
    Network,
    Route,
    build_route,
    signal_state,
)

LOG = logging.getLogger(__name__)

# SUMO's stock bicycle vType uses these scalars; they are the "scalar"
# parameter source and the clustering baseline in the evaluation.
SCALAR_A_MAX = 1.2  # m/s^2
SCALAR_V_MAX = 5.56  # m/s

A_MAX_CAP = 4.0  # m/s^2, sampled accelerations above this are resampled
V_MAX_FLOOR = 1.0  # m/s, sampled desired speeds below this are resampled

#: speed increases are capped at a_max per step; decreases normally stay
#: within b_max but chained braking (queue joins, end-of-green dilemmas) may
#: demand up to this emergency multiple of the comfortable deceleration
EMERGENCY_DECEL_FACTOR = 2.0

PARAM_SCALAR = "scalar"
PARAM_FITTED = "fitted"

PHASE_APPROACHING = "approaching"
PHASE_WAITING = "waiting"
PHASE_CROSSING = "crossing"
PHASE_DONE = "done"

_PERPENDICULAR = {"NS": "EW", "EW": "NS"}


@dataclass(frozen=True)
class CyclistParams:
    a_max: float  # m/s^2
    v_max: float  # m/s
    b_max: float = 3.0  # m/s^2 comfortable deceleration
    min_gap: float = 0.5  # m
    length: float = 1.8  # m


@dataclass(frozen=True)
class SimConfig:
    seed: int
    duration: float = 3600.0  # s
    step: float = 1.0  # s
    demand: float = 200.0  # left-turning cyclists per hour per approach
    p_indirect: float = 0.57
    param_source: str = PARAM_FITTED
    background_through: float = 0.0  # through cyclists per hour per approach
    depart_speed: str = "max"  # "max" or "zero"
    region_inflate: float = 5.0  # m around the conflict area for timing

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not 0.0 <= self.p_indirect <= 1.0:
            raise ValueError("p_indirect must lie in [0, 1]")
        if self.param_source not in (PARAM_SCALAR, PARAM_FITTED):
            raise ValueError(f"unknown param_source {self.param_source!r}")
        if self.depart_speed not in ("max", "zero"):
            raise ValueError(f"unknown depart_speed {self.depart_speed!r}")


@dataclass(frozen=True)
class Scenario:
    network: Network
    lane_only: bool = False  # intersection design forbids the direct turn


@dataclass
class StepRecord:
    t: float
    cyclist_id: int
    s: float
    speed: float
    accel: float
    phase: str
    x: float
    y: float


@dataclass
class CyclistSummary:
    cyclist_id: int
    heading: str
    kind: str
    spawn_time: float
    entry_time: float | None
    exit_time: float | None
    completed: bool
    a_max: float
    v_max: float
    max_speed: float
    max_accel: float
    obstructed: bool


@dataclass
class TrajectoryLog:
    records: list[StepRecord] = field(default_factory=list)
    summaries: list[CyclistSummary] = field(default_factory=list)
    spawned: int = 0
    completed: int = 0
    active_at_end: int = 0
    meta: dict = field(default_factory=dict)


def sample_cyclist_params(
    amax_dist: BurrXIIParams,
    vmax_dist: JohnsonSUParams,
    rng: np.random.Generator,
    b_max: float = 3.0,
    min_gap: float = 0.5,
    length: float = 1.8,
    stats: dict | None = None,
) -> CyclistParams:
    """Independent draws of a_max and v_max from the fitted distributions.

    The unbounded S_U tail is truncated by rejection below 1 m/s and the
    acceleration above 4 m/s^2; rejections are counted in ``stats`` and
    should be negligible for realistic fits.  No additional speed-deviation
    factor is applied: heterogeneity lives entirely in the distributions.
    """
    a = float(amax_dist.sample(rng, 1)[0])
    while a > A_MAX_CAP:
        if stats is not None:
            stats["amax_rejections"] = stats.get("amax_rejections", 0) + 1
        a = float(amax_dist.sample(rng, 1)[0])
    v = float(vmax_dist.sample(rng, 1)[0])
    while v < V_MAX_FLOOR:
        if stats is not None:
            stats["vmax_rejections"] = stats.get("vmax_rejections", 0) + 1
        v = float(vmax_dist.sample(rng, 1)[0])
    return CyclistParams(a_max=a, v_max=v, b_max=b_max, min_gap=min_gap, length=length)


def scalar_params(b_max: float = 3.0, min_gap: float = 0.5, length: float = 1.8) -> CyclistParams:
    return CyclistParams(SCALAR_A_MAX, SCALAR_V_MAX, b_max, min_gap, length)


def choose_turn(rng: np.random.Generator, p_indirect: float, lane_only: bool = False) -> str:
    """Bernoulli turn-style choice; lane_only forces the indirect path."""
    if lane_only:
        rng.random()  # keep stream alignment across lane_only settings
        return INDIRECT
    return INDIRECT if rng.random() < p_indirect else DIRECT


def safe_speed(leader_gap: float, leader_speed: float, params: CyclistParams, step: float = 1.0) -> float:
    """Krauss safe speed: fastest speed that still stops behind the leader.

    Solves v*tau + v^2/(2b) <= gap - min_gap + v_l^2/(2b) for v with one
    step of reaction time; never negative.
    """
    g = max(leader_gap - params.min_gap, 0.0)
    b = params.b_max
    v = -b * step + math.sqrt(b * b * step * step + leader_speed * leader_speed + 2.0 * b * g)
    return max(v, 0.0)


@dataclass
class _Cyclist:
    cyclist_id: int
    heading: str
    kind: str
    route: Route
    params: CyclistParams
    spawn_time: float
    s: float = 0.0
    v: float = 0.0
    phase: str = PHASE_APPROACHING
    entry_time: float | None = None
    exit_time: float | None = None
    max_speed: float = 0.0
    max_accel: float = -math.inf
    obstructed: bool = False
    waiting_at_node: bool = False
    node_release: float | None = None


@dataclass(frozen=True)
class _Arrival:
    time: float
    heading: str
    kind: str
    params: CyclistParams


class Simulation:
    """One deterministic run; create, then call run() (or step() manually)."""

    def __init__(
        self,
        scenario: Scenario,
        config: SimConfig,
        amax_dist: BurrXIIParams | None = None,
        vmax_dist: JohnsonSUParams | None = None,
    ) -> None:
        if config.param_source == PARAM_FITTED and (amax_dist is None or vmax_dist is None):
            raise ValueError("fitted param_source requires explicit a_max and v_max distributions")
        self.scenario = scenario
        self.config = config
        self.net = scenario.network
        self.t = 0.0
        self.log = TrajectoryLog()
        self.sampler_stats: dict = {}
        self._next_id = 0
        self._active: list[_Cyclist] = []

        self._routes = {
            (h, kind): build_route(self.net, h, kind, config.region_inflate)
            for h in HEADINGS
            for kind in (DIRECT, INDIRECT, THROUGH)
        }

        root = np.random.SeedSequence(config.seed)
        params_ss, turns_ss, arrivals_ss = root.spawn(3)
        self._rng_params = np.random.Generator(np.random.PCG64(params_ss))
        self._rng_turns = np.random.Generator(np.random.PCG64(turns_ss))
        arrival_children = arrivals_ss.spawn(2 * len(HEADINGS))
        self._pending = self._generate_arrivals(
            [np.random.Generator(np.random.PCG64(c)) for c in arrival_children],
            amax_dist,
            vmax_dist,
        )

    def schedule(self, heading: str, kind: str, params: CyclistParams, time: float = 0.0) -> None:
        """Queue one hand-built cyclist (test/debug hook, bypasses demand)."""
        self._pending.append(_Arrival(time, heading, kind, params))
        self._pending.sort(key=lambda a: (a.time, HEADINGS.index(a.heading)))

    # --- arrival generation -------------------------------------------------

    def _arrival_times(self, rng: np.random.Generator, per_hour: float) -> list[float]:
        if per_hour <= 0:
            return []
        times = []
        t = rng.exponential(3600.0 / per_hour)
        while t < self.config.duration:
            times.append(t)
            t += rng.exponential(3600.0 / per_hour)
        return times

    def _generate_arrivals(
        self,
        rngs: list[np.random.Generator],
        amax_dist: BurrXIIParams | None,
        vmax_dist: JohnsonSUParams | None,
    ) -> list[_Arrival]:
        cfg = self.config
        raw: list[tuple[float, int, str]] = []  # (time, heading index, movement)
        for i, heading in enumerate(HEADINGS):
            for t in self._arrival_times(rngs[i], cfg.demand):
                raw.append((t, i, "study"))
            for t in self._arrival_times(rngs[len(HEADINGS) + i], cfg.background_through):
                raw.append((t, i, THROUGH))
        raw.sort()

        arrivals = []
        for t, i, movement in raw:
            if movement == "study":
                kind = choose_turn(self._rng_turns, cfg.p_indirect, self.scenario.lane_only)
            else:
                kind = THROUGH
            if cfg.param_source == PARAM_SCALAR:
                params = scalar_params()
            else:
                params = sample_cyclist_params(
                    amax_dist, vmax_dist, self._rng_params, stats=self.sampler_stats
                )
            arrivals.append(_Arrival(t, HEADINGS[i], kind, params))
        return arrivals

    # --- stepping -----------------------------------------------------------

    def _spawn_due(self) -> None:
        still_pending: list[_Arrival] = []
        blocked_headings: set[str] = set()
        for arr in self._pending:
            if arr.time > self.t or arr.heading in blocked_headings:
                still_pending.append(arr)
                continue
            leader = self._nearest_on_approach(arr.heading)
            if leader is not None:
                gap = leader.s - leader.params.length
                if gap < arr.params.length + arr.params.min_gap:
                    # entry occupied: keep FIFO order per approach
                    blocked_headings.add(arr.heading)
                    still_pending.append(arr)
                    continue
            self._insert(arr)
        self._pending = still_pending

    def _nearest_on_approach(self, heading: str) -> "_Cyclist | None":
        best = None
        for c in self._active:
            if c.heading == heading and (best is None or c.s < best.s):
                best = c
        return best

    def _insert(self, arr: _Arrival) -> None:
        route = self._routes[(arr.heading, arr.kind)]
        c = _Cyclist(
            cyclist_id=self._next_id,
            heading=arr.heading,
            kind=arr.kind,
            route=route,
            params=arr.params,
            spawn_time=self.t,
        )
        self._next_id += 1
        if self.config.depart_speed == "max":
            leader = self._nearest_on_approach(arr.heading)
            v0 = arr.params.v_max
            if leader is not None:
                gap = leader.s - leader.params.length - 0.0
                v0 = min(v0, safe_speed(gap, leader.v, arr.params, self.config.step))
            c.v = v0
        c.max_speed = c.v
        self._active.append(c)
        self.log.spawned += 1
        x, y = route.position(0.0)
        self.log.records.append(
            StepRecord(self.t, c.cyclist_id, 0.0, c.v, 0.0, c.phase, x, y)
        )

    def _barrier_allows(self, gap: float, speed: float, green: bool, remaining: float) -> bool:
        """May the cyclist ignore a barrier it has not reached yet?

        Only when the signal is green and the line is reachable at the
        current pace at least one step before green ends; otherwise the
        Krauss bound toward the barrier applies, which guarantees it can
        still stop when the light flips.
        """
        if not green:
            return False
        v_ref = max(speed, 1.0)
        return gap <= v_ref * (remaining - self.config.step)

    def _target_speed(self, c: _Cyclist, leader: "_Cyclist | None", axis_states) -> float:
        cfg = self.config
        p = c.params
        free = min(p.v_max, c.v + p.a_max * cfg.step)
        v = free

        if leader is not None:
            gap = leader.s - leader.params.length - c.s
            if gap < -1e-9:
                raise InternalInconsistencyError(
                    f"negative gap {gap:.3f} m behind cyclist {leader.cyclist_id}"
                )
            constrained = min(v, safe_speed(gap, leader.v, p, cfg.step))
            if constrained < free - 1e-12:
                c.obstructed = True
            v = constrained

        barrier_s = None
        if c.s < c.route.s_stop:
            own = axis_states[c.route.entry_axis]
            if not self._barrier_allows(c.route.s_stop - c.s, c.v, own.green, own.remaining_green):
                barrier_s = c.route.s_stop
        elif c.route.s_node is not None and c.s < c.route.s_node:
            perp = axis_states[_PERPENDICULAR[c.route.entry_axis]]
            gap_node = c.route.s_node - c.s
            if c.waiting_at_node:
                if perp.green and c.node_release is None:
                    c.node_release = self.t + cfg.step
                allowed = perp.green and c.node_release is not None and self.t >= c.node_release
            else:
                allowed = self._barrier_allows(gap_node, c.v, perp.green, perp.remaining_green)
            if not allowed:
                barrier_s = c.route.s_node

        if barrier_s is not None:
            v = min(v, safe_speed(barrier_s - c.s, 0.0, p, cfg.step))
        return max(v, 0.0)

    def step(self) -> None:
        """Advance the whole state by one tick of config.step seconds."""
        cfg = self.config
        self._spawn_due()
        axis_states = signal_state(self.net.signal, self.t)
        t_next = self.t + cfg.step

        done: list[_Cyclist] = []
        for heading in HEADINGS:
            group = sorted(
                (c for c in self._active if c.heading == heading),
                key=lambda c: (-c.s, c.cyclist_id),
            )
            updated: list[_Cyclist] = []
            for c in group:
                leader = self._applicable_leader(c, updated)
                v_new = self._target_speed(c, leader, axis_states)
                accel = (v_new - c.v) / cfg.step
                c.v = v_new
                c.s += v_new * cfg.step
                c.max_speed = max(c.max_speed, v_new)
                c.max_accel = max(c.max_accel, accel)

                if c.entry_time is None and c.s >= c.route.s_region_in:
                    c.entry_time = t_next
                if c.exit_time is None and c.s >= c.route.s_region_out:
                    c.exit_time = t_next

                at_node = (
                    c.route.s_node is not None
                    and c.s < c.route.s_node
                    and c.route.s_node - c.s <= c.params.min_gap + 0.05
                    and v_new == 0.0
                )
                if at_node:
                    c.waiting_at_node = True
                if c.s >= c.route.s_end:
                    c.phase = PHASE_DONE
                    done.append(c)
                elif v_new == 0.0 and (at_node or c.waiting_at_node or self._at_red_line(c)):
                    c.phase = PHASE_WAITING
                elif c.s >= c.route.s_region_in:
                    c.phase = PHASE_CROSSING
                else:
                    c.phase = PHASE_APPROACHING

                x, y = c.route.position(min(c.s, c.route.s_end))
                self.log.records.append(
                    StepRecord(t_next, c.cyclist_id, c.s, c.v, accel, c.phase, x, y)
                )
                updated.append(c)

        for c in done:
            self._active.remove(c)
            self.log.completed += 1
            self.log.summaries.append(self._summary(c, completed=True))
        self.t = t_next

    def _at_red_line(self, c: _Cyclist) -> bool:
        return c.s < c.route.s_stop and c.route.s_stop - c.s <= c.params.min_gap + 0.05

    def _applicable_leader(self, c: _Cyclist, updated: list[_Cyclist]) -> "_Cyclist | None":
        """Nearest already-moved cyclist ahead that still shares c's path.

        Same-kind cyclists share the whole route; different kinds only share
        the approach, so they stop constraining once past the stop line.
        """
        best = None
        for other in updated:
            if other.kind != c.kind and other.s > c.route.s_stop:
                continue
            if other.s < c.s:
                continue
            if best is None or other.s < best.s:
                best = other
        return best

    def _summary(self, c: _Cyclist, completed: bool) -> CyclistSummary:
        return CyclistSummary(
            cyclist_id=c.cyclist_id,
            heading=c.heading,
            kind=c.kind,
            spawn_time=c.spawn_time,
            entry_time=c.entry_time,
            exit_time=c.exit_time,
            completed=completed,
            a_max=c.params.a_max,
            v_max=c.params.v_max,
            max_speed=c.max_speed,
            max_accel=c.max_accel if c.max_accel > -math.inf else 0.0,
            obstructed=c.obstructed,
        )

    def run(self) -> TrajectoryLog:
        n_steps = int(round(self.config.duration / self.config.step))
        for _ in range(n_steps):
            self.step()
        for c in sorted(self._active, key=lambda c: c.cyclist_id):
            self.log.summaries.append(self._summary(c, completed=False))
        self.log.active_at_end = len(self._active)
        self.log.summaries.sort(key=lambda s: s.cyclist_id)
        if self.sampler_stats:
            LOG.info("sampler rejections: %s", self.sampler_stats)
        self.log.meta = {
            "seed": self.config.seed,
            "duration": self.config.duration,
            "step": self.config.step,
            "demand": self.config.demand,
            "p_indirect": self.config.p_indirect,
            "param_source": self.config.param_source,
            "background_through": self.config.background_through,
            "depart_speed": self.config.depart_speed,
            "region_inflate": self.config.region_inflate,
            "lane_only": self.scenario.lane_only,
            "sampler_rejections": dict(self.sampler_stats),
        }
        return self.log


def run(
    scenario: Scenario,
    config: SimConfig,
    amax_dist: BurrXIIParams | None = None,
    vmax_dist: JohnsonSUParams | None = None,
) -> TrajectoryLog:
    """Simulate one scenario; deterministic for a given config.seed."""
    return Simulation(scenario, config, amax_dist, vmax_dist).run()
