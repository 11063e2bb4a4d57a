"""Acceleration-maneuver extraction and per-ride velocity statistics.

A maneuver is a maximal contiguous episode of positive acceleration meeting
duration and speed-gain thresholds.  Acceleration comes from centered finite
differences of the low-passed speed series; episodes separated by short
sub-threshold gaps are merged and implausibly violent episodes discarded as
sensor artifacts.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySeriesError, LengthMismatchError, ZeroVarianceError
from .traces import SpeedSeries


@dataclass(frozen=True)
class ManeuverConfig:
    a_min: float = 0.05  # m/s^2, episode gate on smoothed acceleration
    t_min: float = 3.0  # s, minimum episode duration
    dv_min: float = 1.0  # m/s, minimum total speed gain
    merge_gap: float = 2.0  # s, sub-threshold gaps shorter than this merge
    a_cap: float = 4.0  # m/s^2, episodes peaking above this are artifacts


@dataclass
class AccelerationManeuver:
    ride_id: str
    start_ms: float
    end_ms: float
    v_start: float
    v_end: float
    a_max: float


@dataclass
class RideKinematics:
    ride_id: str
    v_max: float
    maneuvers: list[AccelerationManeuver] = field(default_factory=list)


def finite_difference_accel(series: SpeedSeries) -> np.ndarray:
    """Centered finite differences, one-sided at the ends; m/s^2."""
    v = series.values
    t = series.time_s
    if v.size < 2:
        return np.zeros_like(v)
    a = np.empty_like(v)
    a[1:-1] = (v[2:] - v[:-2]) / (t[2:] - t[:-2])
    a[0] = (v[1] - v[0]) / (t[1] - t[0])
    a[-1] = (v[-1] - v[-2]) / (t[-1] - t[-2])
    return a


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end] index runs where mask is True (inclusive ends)."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def extract_acceleration_maneuvers(
    series: SpeedSeries, cfg: ManeuverConfig | None = None, ride_id: str = ""
) -> list[AccelerationManeuver]:
    """Episodes of sustained acceleration in a cleaned speed series.

    Returned maneuvers are disjoint and time-ordered; an empty list is a
    valid result.  Raising ``cfg.a_min`` never increases the count.
    """
    cfg = cfg or ManeuverConfig()
    v = series.values
    t = series.time_s
    if v.size < 3:
        return []

    accel = finite_difference_accel(series)
    runs = _runs(accel >= cfg.a_min)

    merged: list[tuple[int, int]] = []
    for run in runs:
        if merged and t[run[0]] - t[merged[-1][1]] < cfg.merge_gap:
            merged[-1] = (merged[-1][0], run[1])
        else:
            merged.append(run)

    out: list[AccelerationManeuver] = []
    for i0, i1 in merged:
        if t[i1] - t[i0] < cfg.t_min:
            continue
        dv = v[i1] - v[i0]
        if dv < cfg.dv_min:
            continue
        a_peak = float(np.max(accel[i0 : i1 + 1]))
        if a_peak > cfg.a_cap:
            continue
        out.append(
            AccelerationManeuver(
                ride_id=ride_id,
                start_ms=float(series.time_ms[i0]),
                end_ms=float(series.time_ms[i1]),
                v_start=float(v[i0]),
                v_end=float(v[i1]),
                a_max=a_peak,
            )
        )
    return out


def max_velocity(speeds) -> float:
    """Maximum of a speed series."""
    v = np.asarray(speeds, dtype=float)
    if v.size == 0:
        raise EmptySeriesError("max_velocity of an empty series")
    return float(np.max(v))


def fraction_above(values, threshold: float, strict: bool = False) -> float:
    """Share of values at or above the threshold.

    The default compares with >= (used for acceleration, "1.2 m/s^2 or
    higher"); strict=True compares with > (used for velocity, "higher
    maximum velocity").
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptySeriesError("fraction_above of an empty list")
    hits = np.count_nonzero(v > threshold) if strict else np.count_nonzero(v >= threshold)
    return hits / v.size


def correlation(a_values, v_values) -> float:
    """Pearson correlation coefficient of two equally long samples."""
    a = np.asarray(a_values, dtype=float)
    b = np.asarray(v_values, dtype=float)
    if a.size != b.size:
        raise LengthMismatchError(f"lengths differ: {a.size} vs {b.size}")
    if a.size < 3:
        raise LengthMismatchError("need at least 3 paired samples")
    if np.std(a) == 0.0 or np.std(b) == 0.0:
        raise ZeroVarianceError("correlation undefined for a constant series")
    return float(np.corrcoef(a, b)[0, 1])


def ride_kinematics(
    series: SpeedSeries, ride_id: str, cfg: ManeuverConfig | None = None
) -> RideKinematics:
    """Per-ride summary: global maximum speed plus extracted maneuvers."""
    return RideKinematics(
        ride_id=ride_id,
        v_max=max_velocity(series.values),
        maneuvers=extract_acceleration_maneuvers(series, cfg, ride_id=ride_id),
    )
