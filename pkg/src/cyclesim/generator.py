"""Synthetic ride generator with ground-truth sidecars.

Produces ride files in the documented text layout together with a JSON
sidecar stating what the analysis stage should find: the true maximum
speed, the number of acceleration maneuvers, and the ramp accelerations.
Three profiles:

* ``constant``  - steady cruise, zero maneuvers;
* ``two-ramp``  - two well-separated speed ramps, exactly two maneuvers;
* ``realistic`` - kinematics drawn from the default Burr XII / Johnson S_U
  parameter sets, gentle curvature, and GPS noise.

Speeds are integrated on a 1 s grid and sampled at the 3 s recording period
of the target format, so the derived-speed pipeline sees exactly what a
phone would have recorded.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import (
    DEFAULT_AMAX_BURR,
    DEFAULT_VMAX_JSU,
    BurrXIIParams,
    JohnsonSUParams,
)
from .geo import enu_to_geo
from .simulation import A_MAX_CAP, V_MAX_FLOOR
from .traces import GeoPoint, RideTrace, write_ride

PROFILES = ("constant", "two-ramp", "realistic")

BASE_LAT, BASE_LON = 52.52, 13.405
BASE_TIMESTAMP_MS = 1_600_000_000_000
SAMPLE_PERIOD_S = 3.0
TRUTH_SCHEMA = "cyclesim/truth/1"


@dataclass
class GeneratedRide:
    trace: RideTrace
    truth: dict


def _profile_constant(rng: np.random.Generator, duration_s: float | None) -> tuple[np.ndarray, dict]:
    v0 = float(rng.uniform(3.0, 6.5))
    dur = int(duration_s if duration_s is not None else 300)
    v = np.full(dur + 1, v0)
    return v, {"v_max_true": v0, "n_maneuvers_true": 0, "ramp_accels": []}


def _profile_two_ramp(rng: np.random.Generator, duration_s: float | None) -> tuple[np.ndarray, dict]:
    v_lo = float(rng.uniform(2.0, 3.5))
    gain1 = float(rng.uniform(2.5, 3.5))
    gain2 = float(rng.uniform(2.0, 3.0))
    a1 = float(rng.uniform(0.5, 0.8))
    a2 = float(rng.uniform(0.5, 0.8))
    v_mid = v_lo + gain1
    v_hi = v_mid + gain2

    pieces = [
        (60.0, v_lo, v_lo),
        (gain1 / a1, v_lo, v_mid),
        (45.0, v_mid, v_mid),
        (gain2 / a2, v_mid, v_hi),
        (60.0, v_hi, v_hi),
    ]
    v = _piecewise_speeds(pieces)
    return v, {"v_max_true": v_hi, "n_maneuvers_true": 2, "ramp_accels": [a1, a2]}


def _profile_realistic(
    rng: np.random.Generator,
    amax_dist: BurrXIIParams,
    vmax_dist: JohnsonSUParams,
) -> tuple[np.ndarray, dict]:
    a_star = float(amax_dist.sample(rng, 1)[0])
    while a_star > A_MAX_CAP or a_star < 0.15:
        a_star = float(amax_dist.sample(rng, 1)[0])
    v_star = float(vmax_dist.sample(rng, 1)[0])
    while v_star < V_MAX_FLOOR:
        v_star = float(vmax_dist.sample(rng, 1)[0])

    v_dip = float(rng.uniform(0.2, 0.5)) * v_star
    a_second = float(rng.uniform(0.5, 0.9)) * a_star
    v_second = float(rng.uniform(0.85, 0.98)) * v_star
    hold1 = float(rng.uniform(60.0, 120.0))
    hold2 = float(rng.uniform(60.0, 120.0))

    pieces = [
        (v_star / a_star, 0.0, v_star),
        (hold1, v_star, v_star),
        ((v_star - v_dip) / 0.8, v_star, v_dip),  # relaxed braking
        (30.0, v_dip, v_dip),
        ((v_second - v_dip) / a_second, v_dip, v_second),
        (hold2, v_second, v_second),
        (v_second / 1.0, v_second, 0.0),
    ]
    v = _piecewise_speeds(pieces)
    return v, {
        "v_max_true": v_star,
        "n_maneuvers_true": 2,
        "ramp_accels": [a_star, a_second],
        "a_peak_true": a_star,
    }


def _piecewise_speeds(pieces: list[tuple[float, float, float]]) -> np.ndarray:
    """Linear speed interpolation over (duration, v_from, v_to) pieces, 1 Hz."""
    ts = [0.0]
    vs = [pieces[0][1]]
    for dur, v_from, v_to in pieces:
        ts.append(ts[-1] + dur)
        vs.append(v_to)
    grid = np.arange(0.0, math.ceil(ts[-1]) + 1.0)
    return np.interp(grid, ts, vs)


def generate_ride(
    profile: str,
    seed: int | np.random.SeedSequence,
    ride_id: str = "",
    noise_std_m: float | None = None,
    duration_s: float | None = None,
    amax_dist: BurrXIIParams = DEFAULT_AMAX_BURR,
    vmax_dist: JohnsonSUParams = DEFAULT_VMAX_JSU,
) -> GeneratedRide:
    """One synthetic ride; identical seeds give identical rides."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    rng = np.random.Generator(np.random.PCG64(seed))

    if profile == "constant":
        v, truth = _profile_constant(rng, duration_s)
        turn_rate = 0.0
        noise = 0.0 if noise_std_m is None else noise_std_m
    elif profile == "two-ramp":
        v, truth = _profile_two_ramp(rng, duration_s)
        turn_rate = 0.0
        noise = 0.0 if noise_std_m is None else noise_std_m
    else:
        v, truth = _profile_realistic(rng, amax_dist, vmax_dist)
        turn_rate = math.radians(0.2)
        noise = 1.0 if noise_std_m is None else noise_std_m

    theta = float(rng.uniform(0.0, 2.0 * math.pi)) + turn_rate * np.arange(v.size)
    x = np.concatenate([[0.0], np.cumsum(v[:-1] * np.cos(theta[:-1]))])
    y = np.concatenate([[0.0], np.cumsum(v[:-1] * np.sin(theta[:-1]))])

    stride = int(SAMPLE_PERIOD_S)
    idx = np.arange(0, v.size, stride)
    xs, ys = x[idx], y[idx]
    if noise > 0:
        xs = xs + rng.normal(0.0, noise, xs.size)
        ys = ys + rng.normal(0.0, noise, ys.size)

    lat, lon = enu_to_geo(xs, ys, BASE_LAT, BASE_LON)
    points = [
        GeoPoint(BASE_TIMESTAMP_MS + int(i) * 1000, float(la), float(lo))
        for i, la, lo in zip(idx, lat, lon)  # idx is on the 1 Hz grid, so seconds
    ]
    trace = RideTrace(ride_id=ride_id, points=points, region_tag="synthetic")
    truth.update(
        {
            "schema": TRUTH_SCHEMA,
            "ride_id": ride_id,
            "profile": profile,
            "noise_std_m": noise,
            "sample_period_s": SAMPLE_PERIOD_S,
            "duration_s": float(v.size - 1),
        }
    )
    return GeneratedRide(trace=trace, truth=truth)


def generate_corpus(
    out_dir: str | Path,
    n: int,
    profile: str,
    seed: int,
    noise_std_m: float | None = None,
) -> list[Path]:
    """Write n ride files plus truth sidecars; returns the ride file paths."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(seed).spawn(n)
    paths = []
    for i, child in enumerate(children):
        ride_id = f"{profile.replace('-', '')}-{seed}-{i:04d}"
        ride = generate_ride(profile, child, ride_id=ride_id, noise_std_m=noise_std_m)
        ride_path = out / f"{ride_id}.csv"
        ride_path.write_text(write_ride(ride.trace), encoding="utf-8")
        (out / f"{ride_id}.truth.json").write_text(
            json.dumps(ride.truth, indent=1), encoding="utf-8"
        )
        paths.append(ride_path)
    return paths
