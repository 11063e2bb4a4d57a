"""Schema-versioned JSON/CSV artifact exchange between pipeline stages.

Every JSON artifact carries a ``schema`` field and every CSV starts with a
``# cyclesim/<kind>/<version>`` comment line; readers reject mismatches
instead of misreading stale files.
"""

import csv
import io
import json
from pathlib import Path

import numpy as np

from .distributions import (
    BURR_FAMILY,
    JSU_FAMILY,
    BurrXIIParams,
    FitResult,
    JohnsonSUParams,
)
from .errors import ArtifactSchemaError
from .evaluation import ComparisonReport, KinematicsHistograms
from .network import Approach, Network, Phase, SignalPlan
from .simulation import CyclistSummary, Scenario, StepRecord, TrajectoryLog

SCHEMA_VERSION = 1


def schema_tag(kind: str) -> str:
    return f"cyclesim/{kind}/{SCHEMA_VERSION}"


def write_json(path: str | Path, kind: str, payload: dict) -> None:
    doc = {"schema": schema_tag(kind)}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_json(path: str | Path, kind: str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactSchemaError(f"{path}: unreadable artifact ({exc})") from exc
    tag = doc.get("schema")
    if tag != schema_tag(kind):
        raise ArtifactSchemaError(f"{path}: expected schema {schema_tag(kind)!r}, found {tag!r}")
    return doc


def write_csv(path: str | Path, kind: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(f"# {schema_tag(kind)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: str | Path, kind: str) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {schema_tag(kind)}":
        found = lines[0].strip() if lines else "<empty>"
        raise ArtifactSchemaError(f"{path}: expected schema {schema_tag(kind)!r}, found {found!r}")
    reader = csv.reader(lines[1:])
    rows = [row for row in reader if row]
    return rows[0], rows[1:]


def _fmt(v) -> str:
    # repr keeps floats round-trip exact and byte-stable across runs
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# Distribution fits
# ---------------------------------------------------------------------------

def fit_to_dict(fit: FitResult) -> dict:
    if fit.family == BURR_FAMILY:
        params = {"c": fit.params.c, "k": fit.params.k, "scale": fit.params.scale}
    else:
        params = {
            "gamma": fit.params.gamma,
            "delta": fit.params.delta,
            "xi": fit.params.xi,
            "scale": fit.params.scale,
        }
    return {
        "family": fit.family,
        "params": params,
        "log_likelihood": fit.log_likelihood,
        "ks": fit.ks_statistic,
        "n": fit.n,
        "converged": fit.converged,
    }


def params_from_dict(family: str, params: dict) -> BurrXIIParams | JohnsonSUParams:
    if family == BURR_FAMILY:
        return BurrXIIParams(c=params["c"], k=params["k"], scale=params["scale"])
    if family == JSU_FAMILY:
        return JohnsonSUParams(
            gamma=params["gamma"], delta=params["delta"], xi=params["xi"], scale=params["scale"]
        )
    raise ArtifactSchemaError(f"unknown distribution family {family!r}")


def write_fit(path: str | Path, fit: FitResult) -> None:
    write_json(path, "fit", fit_to_dict(fit))


def read_fit(path: str | Path) -> FitResult:
    doc = read_json(path, "fit")
    params = params_from_dict(doc["family"], doc["params"])
    return FitResult(
        family=doc["family"],
        params=params,
        log_likelihood=doc["log_likelihood"],
        ks_statistic=doc["ks"],
        n=doc["n"],
        converged=doc["converged"],
    )


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def scenario_to_dict(scenario: Scenario, sim: dict | None = None) -> dict:
    net = scenario.network
    return {
        "approaches": [
            {
                "heading": ap.heading,
                "lane_count": ap.lane_count,
                "lane_width": ap.lane_width,
                "approach_length": ap.approach_length,
                "has_bike_lane": ap.has_bike_lane,
            }
            for ap in (net.approaches[h] for h in ("N", "E", "S", "W"))
        ],
        "signal": {
            "phases": [
                {"axis": ph.axis, "green": ph.green, "all_red": ph.all_red}
                for ph in net.signal.phases
            ]
        },
        "lane_only": scenario.lane_only,
        "sim": sim or {},
    }


def scenario_from_dict(doc: dict) -> tuple[Scenario, dict]:
    """Returns the scenario plus the ``sim`` section (SimConfig keyword args)."""
    approaches = {
        ap["heading"]: Approach(
            heading=ap["heading"],
            lane_count=ap["lane_count"],
            lane_width=ap["lane_width"],
            approach_length=ap.get("approach_length", 100.0),
            has_bike_lane=ap.get("has_bike_lane", False),
        )
        for ap in doc["approaches"]
    }
    plan = SignalPlan(
        tuple(
            Phase(axis=ph["axis"], green=ph["green"], all_red=ph.get("all_red", 0.0))
            for ph in doc["signal"]["phases"]
        )
    )
    scenario = Scenario(
        network=Network(approaches=approaches, signal=plan),
        lane_only=doc.get("lane_only", False),
    )
    return scenario, dict(doc.get("sim", {}))


def write_scenario(path: str | Path, scenario: Scenario, sim: dict | None = None) -> None:
    write_json(path, "scenario", scenario_to_dict(scenario, sim))


def read_scenario(path: str | Path) -> tuple[Scenario, dict]:
    return scenario_from_dict(read_json(path, "scenario"))


# ---------------------------------------------------------------------------
# Simulation logs
# ---------------------------------------------------------------------------

STEP_COLUMNS = ["t", "cyclist_id", "s", "speed", "accel", "phase", "x", "y"]


def write_steps(path: str | Path, log: TrajectoryLog) -> None:
    write_csv(
        path,
        "steps",
        STEP_COLUMNS,
        (
            (r.t, r.cyclist_id, r.s, r.speed, r.accel, r.phase, r.x, r.y)
            for r in log.records
        ),
    )


def read_steps(path: str | Path) -> list[StepRecord]:
    header, rows = read_csv(path, "steps")
    if header != STEP_COLUMNS:
        raise ArtifactSchemaError(f"{path}: unexpected columns {header}")
    return [
        StepRecord(
            t=float(r[0]),
            cyclist_id=int(r[1]),
            s=float(r[2]),
            speed=float(r[3]),
            accel=float(r[4]),
            phase=r[5],
            x=float(r[6]),
            y=float(r[7]),
        )
        for r in rows
    ]


def write_summaries(path: str | Path, log: TrajectoryLog) -> None:
    write_json(
        path,
        "summaries",
        {
            "meta": log.meta,
            "spawned": log.spawned,
            "completed": log.completed,
            "active_at_end": log.active_at_end,
            "cyclists": [vars(s) for s in log.summaries],
        },
    )


def read_summaries(path: str | Path) -> TrajectoryLog:
    doc = read_json(path, "summaries")
    log = TrajectoryLog(
        records=[],
        summaries=[CyclistSummary(**c) for c in doc["cyclists"]],
        spawned=doc["spawned"],
        completed=doc["completed"],
        active_at_end=doc["active_at_end"],
        meta=doc.get("meta", {}),
    )
    return log


# ---------------------------------------------------------------------------
# Evaluation reports
# ---------------------------------------------------------------------------

def write_report(path: str | Path, report: ComparisonReport, label_a: str, label_b: str) -> None:
    write_json(
        path,
        "report",
        {
            "ks": report.ks,
            "sides": {
                "a": {
                    "label": label_a,
                    "n": report.n_a,
                    "mean": report.mean_a,
                    "quantiles": {str(p): q for p, q in report.quantiles_a.items()},
                },
                "b": {
                    "label": label_b,
                    "n": report.n_b,
                    "mean": report.mean_b,
                    "quantiles": {str(p): q for p, q in report.quantiles_b.items()},
                },
            },
        },
    )


def write_ecdf_csv(path: str | Path, sides: dict[str, np.ndarray]) -> None:
    rows = []
    for label, values in sides.items():
        v = np.sort(np.asarray(values, dtype=float))
        for i, x in enumerate(v, start=1):
            rows.append((label, float(x), i / v.size))
    write_csv(path, "ecdf", ["side", "value", "fraction"], rows)


def write_hist_csv(path: str | Path, hists: KinematicsHistograms) -> None:
    rows = []
    for metric, hist in (("max_accel", hists.accel_hist), ("max_speed", hists.speed_hist)):
        for left, right, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
            rows.append((metric, float(left), float(right), int(count)))
    write_csv(path, "hist", ["metric", "bin_left", "bin_right", "count"], rows)


def read_durations(path: str | Path) -> list[float]:
    """Reference durations: either a summaries JSON or a durations CSV."""
    path = Path(path)
    if path.suffix == ".json":
        from .evaluation import crossing_durations

        return crossing_durations(read_summaries(path))
    header, rows = read_csv(path, "durations")
    col = header.index("duration")
    return [float(r[col]) for r in rows]


def write_durations(path: str | Path, durations) -> None:
    write_csv(path, "durations", ["duration"], ((float(d),) for d in durations))
