"""Post-processing of simulation logs: crossing-duration ECDFs, per-cyclist
kinematics histograms, and two-sample comparison reports.

Durations count only the time inside the measurement region (the conflict
area inflated by a configured margin), so approach and departure ride time
stay out of the comparison.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySeriesError
from .network import DIRECT, INDIRECT
from .simulation import TrajectoryLog

QUANTILE_PROBES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

DEFAULT_ACCEL_BIN = 0.1  # m/s^2
DEFAULT_SPEED_BIN = 0.25  # m/s


@dataclass
class ECDF:
    values: np.ndarray  # sorted
    fractions: np.ndarray  # 1/n ... 1

    def __call__(self, x) -> np.ndarray:
        """Right-continuous empirical CDF evaluated at x."""
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        return idx / len(self.values)


@dataclass
class ComparisonReport:
    ks: float
    quantiles_a: dict[float, float]
    quantiles_b: dict[float, float]
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int


@dataclass
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray


@dataclass
class KinematicsHistograms:
    max_speeds: np.ndarray
    max_accels: np.ndarray
    speed_hist: Histogram
    accel_hist: Histogram


def crossing_durations(log: TrajectoryLog, kinds: tuple[str, ...] = (DIRECT, INDIRECT)) -> list[float]:
    """Region exit minus region entry for every completed left-turner.

    Background through traffic and cyclists that never finished are
    excluded.
    """
    out = []
    for s in log.summaries:
        if not s.completed or s.kind not in kinds:
            continue
        if s.entry_time is None or s.exit_time is None:
            continue
        out.append(s.exit_time - s.entry_time)
    return out


def ecdf(values) -> ECDF:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise EmptySeriesError("ECDF of an empty list")
    return ECDF(values=v, fractions=np.arange(1, v.size + 1, dtype=float) / v.size)


def two_sample_ks(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)| over the pooled sample points."""
    fa, fb = ecdf(a), ecdf(b)
    pooled = np.concatenate([fa.values, fb.values])
    return float(np.max(np.abs(fa(pooled) - fb(pooled))))


def compare(a, b) -> ComparisonReport:
    """Two-sample report: KS distance, decile tables, means, counts."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptySeriesError("compare needs two non-empty samples")
    return ComparisonReport(
        ks=two_sample_ks(a, b),
        quantiles_a={p: float(np.quantile(a, p)) for p in QUANTILE_PROBES},
        quantiles_b={p: float(np.quantile(b, p)) for p in QUANTILE_PROBES},
        mean_a=float(np.mean(a)),
        mean_b=float(np.mean(b)),
        n_a=int(a.size),
        n_b=int(b.size),
    )


def _bin(values: np.ndarray, width: float) -> Histogram:
    if values.size == 0:
        return Histogram(bin_edges=np.array([0.0, width]), counts=np.array([0]))
    hi = float(np.max(values))
    edges = np.arange(0.0, hi + width, width)
    if edges[-1] <= hi:
        edges = np.append(edges, edges[-1] + width)
    counts, edges = np.histogram(values, bins=edges)
    return Histogram(bin_edges=edges, counts=counts)


def observed_kinematics_histograms(
    log: TrajectoryLog,
    accel_bin: float = DEFAULT_ACCEL_BIN,
    speed_bin: float = DEFAULT_SPEED_BIN,
    completed_only: bool = True,
) -> KinematicsHistograms:
    """Per-cyclist observed maxima from the step records, binned.

    With scalar parameters in free flow the speed histogram collapses onto
    the single default-value bin; with fitted distributions it spreads.
    """
    summaries = [s for s in log.summaries if s.completed or not completed_only]
    if not summaries:
        raise EmptySeriesError("log contains no finished cyclists")
    max_speeds = np.array([s.max_speed for s in summaries], dtype=float)
    max_accels = np.array([max(s.max_accel, 0.0) for s in summaries], dtype=float)
    return KinematicsHistograms(
        max_speeds=max_speeds,
        max_accels=max_accels,
        speed_hist=_bin(max_speeds, speed_bin),
        accel_hist=_bin(max_accels, accel_bin),
    )
