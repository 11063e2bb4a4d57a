"""Parsing, validation, and filtering of crowdsourced GPS ride files.

A ride file is UTF-8 text in three parts: a free-form header block, a
separator line consisting only of ``=`` characters, and a CSV body whose
header names at least ``lat``, ``lon`` and ``timeStamp`` (epoch
milliseconds).  Rows without coordinates are pure motion-sensor rows and are
skipped.  The layout matches the public SimRa ride files, so those parse
directly; other CSV schemas can be added behind :func:`parse_ride`.

Cleaning follows the two-filter scheme used for the analysis: a Gaussian
kernel over the timestamps for the coordinates, and a single-pole low-pass
for the derived speed series.
"""

import csv
import io
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    DegenerateTraceError,
    EmptyRideError,
    InvalidAlphaError,
    InvalidBandwidthError,
    MalformedFileError,
)
from .geo import haversine_consecutive_m

SEPARATOR_RE = re.compile(r"^=+$")
REQUIRED_COLUMNS = ("lat", "lon", "timeStamp")

# Defect codes reported by validate_trace.
NON_MONOTONIC_TIME = "non-monotonic-time"
DUPLICATE_TIME = "duplicate-time"
TELEPORT_JUMP = "teleport-jump"
TOO_SHORT = "too-short"
SPEED_OUTLIER = "speed-outlier"
SAMPLING_INTERVAL = "sampling-interval"

ALL_DEFECTS = (
    NON_MONOTONIC_TIME,
    DUPLICATE_TIME,
    TELEPORT_JUMP,
    TOO_SHORT,
    SPEED_OUTLIER,
    SAMPLING_INTERVAL,
)

#: Defects that reject a trace outright; duplicate timestamps are repaired
#: by clean_trace instead.
DEFAULT_FATAL = frozenset(ALL_DEFECTS) - {DUPLICATE_TIME}


class GeoPoint(NamedTuple):
    timestamp: int  # epoch milliseconds
    lat: float
    lon: float


@dataclass
class RideTrace:
    """One ride: ordered geo points plus an optional speed series."""

    ride_id: str
    points: list[GeoPoint]
    speeds: np.ndarray | None = None
    region_tag: str | None = None

    def __len__(self) -> int:
        return len(self.points)

    def timestamps_ms(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.points], dtype=np.int64)

    def lats(self) -> np.ndarray:
        return np.array([p.lat for p in self.points], dtype=float)

    def lons(self) -> np.ndarray:
        return np.array([p.lon for p in self.points], dtype=float)

    def duration_s(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return (self.points[-1].timestamp - self.points[0].timestamp) / 1000.0


@dataclass
class SpeedSeries:
    """Speed samples aligned to interval midpoints of the source trace."""

    time_ms: np.ndarray
    values: np.ndarray  # m/s

    def __post_init__(self) -> None:
        self.time_ms = np.asarray(self.time_ms, dtype=float)
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def time_s(self) -> np.ndarray:
        return self.time_ms / 1000.0


@dataclass(frozen=True)
class ValidationConfig:
    """Thresholds for defect detection; generous defaults for cyclists."""

    teleport_speed: float = 40.0  # m/s, single implied jump above this
    min_points: int = 30
    min_duration_s: float = 60.0
    outlier_speed: float = 25.0  # m/s sustained
    outlier_run: int = 3  # consecutive intervals
    min_median_interval_s: float = 1.0
    max_median_interval_s: float = 10.0
    fatal: frozenset[str] = DEFAULT_FATAL

    @classmethod
    def from_dict(cls, raw: dict) -> "ValidationConfig":
        kwargs = dict(raw)
        if "fatal" in kwargs:
            kwargs["fatal"] = frozenset(kwargs["fatal"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "teleport_speed": self.teleport_speed,
            "min_points": self.min_points,
            "min_duration_s": self.min_duration_s,
            "outlier_speed": self.outlier_speed,
            "outlier_run": self.outlier_run,
            "min_median_interval_s": self.min_median_interval_s,
            "max_median_interval_s": self.max_median_interval_s,
            "fatal": sorted(self.fatal),
        }


@dataclass
class ValidationReport:
    accepted: bool
    defects: list[str] = field(default_factory=list)
    points_kept: int = 0
    points_dropped: int = 0


def parse_ride(raw: str, ride_id: str = "") -> RideTrace:
    """Parse ride file text into a :class:`RideTrace`.

    Raises MalformedFileError when the separator or CSV header is missing and
    EmptyRideError when fewer than two geo rows remain.
    """
    lines = raw.splitlines()
    sep_idx = None
    for i, line in enumerate(lines):
        if SEPARATOR_RE.match(line.strip()):
            sep_idx = i
            break
    if sep_idx is None:
        raise MalformedFileError(f"{ride_id or '<ride>'}: no '=' separator line")

    region_tag = None
    for line in lines[:sep_idx]:
        if line.startswith("region="):
            region_tag = line.split("=", 1)[1].strip() or None

    header_idx = None
    for i in range(sep_idx + 1, len(lines)):
        fields = [f.strip() for f in lines[i].split(",")]
        if all(col in fields for col in REQUIRED_COLUMNS):
            header_idx = i
            break
    if header_idx is None:
        raise MalformedFileError(
            f"{ride_id or '<ride>'}: no CSV header with columns {REQUIRED_COLUMNS}"
        )

    reader = csv.DictReader(io.StringIO("\n".join(lines[header_idx:])))
    points: list[GeoPoint] = []
    for row in reader:
        lat_raw = (row.get("lat") or "").strip()
        lon_raw = (row.get("lon") or "").strip()
        ts_raw = (row.get("timeStamp") or "").strip()
        if not lat_raw or not lon_raw or not ts_raw:
            continue  # motion-sensor row
        points.append(GeoPoint(int(float(ts_raw)), float(lat_raw), float(lon_raw)))

    if len(points) < 2:
        raise EmptyRideError(f"{ride_id or '<ride>'}: {len(points)} geo rows, need >= 2")
    return RideTrace(ride_id=ride_id, points=points, region_tag=region_tag)


def write_ride(trace: RideTrace, header_lines: Iterable[str] = ()) -> str:
    """Serialize a trace in the ride file layout accepted by parse_ride.

    Coordinates are written with repr so a write/parse round trip is exact.
    """
    out: list[str] = ["cyclesim-synthetic#1"]
    out.extend(header_lines)
    if trace.region_tag:
        out.append(f"region={trace.region_tag}")
    out.append("=" * 24)
    out.append("lat,lon,X,Y,Z,timeStamp,acc,a,b,c")
    for p in trace.points:
        out.append(f"{p.lat!r},{p.lon!r},,,,{p.timestamp},,,,")
    return "\n".join(out) + "\n"


def _implied_speeds(trace: RideTrace) -> np.ndarray:
    """Speeds over intervals with positive dt; zero-dt intervals are skipped."""
    ts = trace.timestamps_ms()
    dist = haversine_consecutive_m(trace.lats(), trace.lons())
    dt = np.diff(ts) / 1000.0
    ok = dt > 0
    return dist[ok] / dt[ok]


def validate_trace(trace: RideTrace, rules: ValidationConfig | None = None) -> ValidationReport:
    """Detect defects without mutating the trace.

    Pure: calling twice on the same trace yields identical reports.
    """
    rules = rules or ValidationConfig()
    defects: list[str] = []
    ts = trace.timestamps_ms()
    dt = np.diff(ts)

    n_dup = int(np.count_nonzero(dt == 0))
    if np.any(dt < 0):
        defects.append(NON_MONOTONIC_TIME)
    if n_dup:
        defects.append(DUPLICATE_TIME)

    if len(trace) < rules.min_points or trace.duration_s() < rules.min_duration_s:
        defects.append(TOO_SHORT)

    speeds = _implied_speeds(trace)
    if speeds.size:
        if np.any(speeds > rules.teleport_speed):
            defects.append(TELEPORT_JUMP)
        over = speeds > rules.outlier_speed
        if over.size >= rules.outlier_run:
            window = np.convolve(over.astype(int), np.ones(rules.outlier_run, dtype=int), "valid")
            if np.any(window == rules.outlier_run):
                defects.append(SPEED_OUTLIER)

    pos_dt = dt[dt > 0] / 1000.0
    if pos_dt.size:
        med = float(np.median(pos_dt))
        if not (rules.min_median_interval_s <= med <= rules.max_median_interval_s):
            defects.append(SAMPLING_INTERVAL)

    accepted = not any(d in rules.fatal for d in defects)
    return ValidationReport(
        accepted=accepted,
        defects=defects,
        points_kept=len(trace) - n_dup,
        points_dropped=n_dup,
    )


def clean_trace(trace: RideTrace) -> RideTrace:
    """Drop points whose timestamp repeats the previous one (keep the first)."""
    kept: list[GeoPoint] = []
    last_ts: int | None = None
    for p in trace.points:
        if last_ts is not None and p.timestamp == last_ts:
            continue
        kept.append(p)
        last_ts = p.timestamp
    return replace(trace, points=kept, speeds=None)


def gaussian_kernel_smooth(points: list[GeoPoint], bandwidth_s: float) -> list[GeoPoint]:
    """Smooth coordinates with a Gaussian kernel over the timestamps.

    Each output coordinate is the average of all input coordinates weighted
    by exp(-dt^2 / (2 * bandwidth^2)), normalized to sum 1.  Length and
    timestamps are preserved; outputs stay within the per-axis input bounds.
    """
    if bandwidth_s <= 0:
        raise InvalidBandwidthError(f"bandwidth must be > 0, got {bandwidth_s}")
    if not points:
        return []
    t = np.array([p.timestamp for p in points], dtype=float) / 1000.0
    coords = np.array([[p.lat, p.lon] for p in points], dtype=float)
    out = np.empty_like(coords)
    denom = 2.0 * bandwidth_s * bandwidth_s
    # chunked to keep the n x n weight matrix small for long rides
    for start in range(0, len(t), 512):
        stop = min(start + 512, len(t))
        w = np.exp(-((t[start:stop, None] - t[None, :]) ** 2) / denom)
        w /= w.sum(axis=1, keepdims=True)
        out[start:stop] = w @ coords
    return [GeoPoint(p.timestamp, float(la), float(lo)) for p, (la, lo) in zip(points, out)]


def smooth_trace(trace: RideTrace, bandwidth_s: float = 6.0) -> RideTrace:
    return replace(trace, points=gaussian_kernel_smooth(trace.points, bandwidth_s), speeds=None)


def lowpass_velocity(speeds: np.ndarray, alpha: float = 0.4) -> np.ndarray:
    """Single-pole exponential smoothing: y[0]=x[0], y[i]=a*x[i]+(1-a)*y[i-1]."""
    if not (0.0 < alpha <= 1.0):
        raise InvalidAlphaError(f"alpha must be in (0, 1], got {alpha}")
    x = np.asarray(speeds, dtype=float)
    if x.size == 0:
        raise DegenerateTraceError("empty speed series")
    y = np.empty_like(x)
    y[0] = x[0]
    for i in range(1, x.size):
        y[i] = alpha * x[i] + (1.0 - alpha) * y[i - 1]
    return y


def derive_speeds(trace: RideTrace) -> SpeedSeries:
    """Haversine distance over dt between consecutive points.

    The n-1 values are aligned to interval midpoints.  Requires strictly
    increasing timestamps (run clean_trace/validate_trace first).
    """
    if len(trace) < 2:
        raise DegenerateTraceError(f"{trace.ride_id}: need >= 2 points")
    ts = trace.timestamps_ms()
    dt = np.diff(ts) / 1000.0
    if np.any(dt <= 0):
        raise DegenerateTraceError(f"{trace.ride_id}: non-increasing timestamps")
    dist = haversine_consecutive_m(trace.lats(), trace.lons())
    mid = (ts[:-1] + ts[1:]) / 2.0
    return SpeedSeries(time_ms=mid, values=dist / dt)


def filtered_speed_series(
    trace: RideTrace,
    bandwidth_s: float = 6.0,
    alpha: float = 0.4,
    edge_trim_s: float | None = None,
) -> tuple[RideTrace, SpeedSeries]:
    """Full cleaning pipeline: dedupe, kernel-smooth, derive, trim, low-pass.

    The kernel window is one-sided at the trace ends, which drags the end
    coordinates inward and fakes a speed ramp there; speed samples within
    edge_trim_s (default 3 bandwidths) of either end are therefore dropped
    before analysis.
    """
    cleaned = clean_trace(trace)
    smoothed = smooth_trace(cleaned, bandwidth_s)
    series = derive_speeds(smoothed)
    if edge_trim_s is None:
        edge_trim_s = 3.0 * bandwidth_s
    t0 = smoothed.points[0].timestamp + edge_trim_s * 1000.0
    t1 = smoothed.points[-1].timestamp - edge_trim_s * 1000.0
    keep = (series.time_ms >= t0) & (series.time_ms <= t1)
    if np.count_nonzero(keep) >= 2:
        series = SpeedSeries(time_ms=series.time_ms[keep], values=series.values[keep])
    return smoothed, SpeedSeries(time_ms=series.time_ms, values=lowpass_velocity(series.values, alpha))
