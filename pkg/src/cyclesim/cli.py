"""Command-line pipeline: generate -> ingest -> analyze -> fit -> simulate
-> evaluate.

Each stage reads only files and writes only files, so stages can be re-run
independently.  Every artifact carries a schema version and echoes the
effective configuration, making runs self-describing.

Exit codes: 0 on success, 2 when the only failures were data-validation
rejections, 3 on pipeline errors (bad artifacts, missing inputs,
simulation inconsistencies).
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts, evaluation, figures
from .distributions import BURR_FAMILY, JSU_FAMILY, fit_mle
from .errors import CycleSimError, InternalInconsistencyError
from .generator import PROFILES, generate_corpus
from .kinematics import (
    ManeuverConfig,
    correlation,
    fraction_above,
    max_velocity,
    extract_acceleration_maneuvers,
)
from .network import (
    DIRECT,
    HEADINGS,
    INDIRECT,
    Approach,
    Network,
    Phase,
    SignalPlan,
    synthesize_direct_turn,
    synthesize_indirect_turn,
)
from .simulation import (
    PARAM_FITTED,
    PARAM_SCALAR,
    SCALAR_A_MAX,
    SCALAR_V_MAX,
    Scenario,
    SimConfig,
    run,
)
from .traces import ValidationConfig, filtered_speed_series, parse_ride, validate_trace

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PIPELINE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are pipeline errors, not data ones
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_PIPELINE)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    paths = generate_corpus(
        args.out, n=args.n, profile=args.profile, seed=args.seed, noise_std_m=args.noise
    )
    print(f"generated {len(paths)} {args.profile} rides in {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def _ingest_worker(task: tuple) -> dict:
    path_str, out_dir, rules_dict, bandwidth, alpha = task
    path = Path(path_str)
    ride_id = path.stem
    try:
        trace = parse_ride(path.read_text(encoding="utf-8"), ride_id=ride_id)
    except CycleSimError as exc:
        return {"ride_id": ride_id, "status": "parse-error", "error": str(exc)}
    rules = ValidationConfig.from_dict(rules_dict)
    report = validate_trace(trace, rules)
    result = {
        "ride_id": ride_id,
        "status": "accepted" if report.accepted else "rejected",
        "defects": report.defects,
        "points_kept": report.points_kept,
        "points_dropped": report.points_dropped,
    }
    if report.accepted:
        smoothed, series = filtered_speed_series(trace, bandwidth_s=bandwidth, alpha=alpha)
        artifacts.write_json(
            Path(out_dir) / f"{ride_id}.json",
            "trace",
            {
                "ride_id": ride_id,
                "region_tag": smoothed.region_tag,
                "points": {
                    "timestamp_ms": [p.timestamp for p in smoothed.points],
                    "lat": [p.lat for p in smoothed.points],
                    "lon": [p.lon for p in smoothed.points],
                },
                "speed_series": {
                    "time_ms": series.time_ms.tolist(),
                    "speed_ms": series.values.tolist(),
                },
                "filters": {"gaussian_bandwidth_s": bandwidth, "lowpass_alpha": alpha},
                "validation": result,
            },
        )
    return result


def cmd_ingest(args) -> int:
    in_dir = Path(args.input)
    files = sorted(in_dir.glob("*.csv"))
    if not files:
        print(f"no ride files (*.csv) under {in_dir}", file=sys.stderr)
        return EXIT_PIPELINE
    out_dir = Path(args.out)
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)

    rules = ValidationConfig()
    if args.validation_config:
        rules = ValidationConfig.from_dict(
            json.loads(Path(args.validation_config).read_text(encoding="utf-8"))
        )

    tasks = [(str(p), str(traces_dir), rules.to_dict(), args.bandwidth, args.alpha) for p in files]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_ingest_worker, tasks))
    else:
        results = [_ingest_worker(t) for t in tasks]

    used = sum(1 for r in results if r["status"] == "accepted")
    parse_failures = sum(1 for r in results if r["status"] == "parse-error")
    defect_counts: dict[str, int] = {}
    for r in results:
        for d in r.get("defects", []):
            defect_counts[d] = defect_counts.get(d, 0) + 1

    artifacts.write_json(
        out_dir / "ingest_summary.json",
        "ingest-summary",
        {
            "total": len(files),
            "used": used,
            "rejected": len(files) - used - parse_failures,
            "parse_failures": parse_failures,
            "defects": defect_counts,
            "config": {
                "validation": rules.to_dict(),
                "gaussian_bandwidth_s": args.bandwidth,
                "lowpass_alpha": args.alpha,
            },
            "files": {r["ride_id"]: r for r in results},
        },
    )
    print(f"ingest: {used}/{len(files)} rides used "
          f"({parse_failures} parse failures, defects: {defect_counts or 'none'})")
    return EXIT_OK if used == len(files) else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _analyze_worker(task: tuple) -> dict | None:
    path_str, cfg_fields = task
    doc = artifacts.read_json(path_str, "trace")
    from .traces import SpeedSeries

    series = SpeedSeries(
        time_ms=np.array(doc["speed_series"]["time_ms"], dtype=float),
        values=np.array(doc["speed_series"]["speed_ms"], dtype=float),
    )
    if len(series) == 0:
        return None
    cfg = ManeuverConfig(**cfg_fields)
    ride_id = doc["ride_id"]
    maneuvers = extract_acceleration_maneuvers(series, cfg, ride_id=ride_id)
    return {
        "ride_id": ride_id,
        "v_max": max_velocity(series.values),
        "maneuvers": [
            {
                "start_ms": m.start_ms,
                "end_ms": m.end_ms,
                "v_start": m.v_start,
                "v_end": m.v_end,
                "a_max": m.a_max,
            }
            for m in maneuvers
        ],
    }


def cmd_analyze(args) -> int:
    traces_dir = Path(args.traces)
    files = sorted(traces_dir.glob("*.json"))
    if not files:
        print(f"no trace artifacts under {traces_dir}", file=sys.stderr)
        return EXIT_PIPELINE
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    cfg = ManeuverConfig(
        a_min=args.a_min, t_min=args.t_min, dv_min=args.dv_min,
        merge_gap=args.merge_gap, a_cap=args.a_cap,
    )
    tasks = [(str(p), vars(cfg)) for p in files]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rides = [r for r in pool.map(_analyze_worker, tasks) if r]
    else:
        rides = [r for r in (_analyze_worker(t) for t in tasks) if r]

    maneuver_rows = [
        (r["ride_id"], m["start_ms"], m["end_ms"], m["v_start"], m["v_end"], m["a_max"])
        for r in rides
        for m in r["maneuvers"]
    ]
    artifacts.write_csv(
        out_dir / "maneuvers.csv",
        "maneuvers",
        ["ride_id", "start_ms", "end_ms", "v_start", "v_end", "a_max"],
        maneuver_rows,
    )

    a_values = [row[5] for row in maneuver_rows]
    v_values = [r["v_max"] for r in rides]
    summary = {"n_rides": len(rides), "n_maneuvers": len(a_values)}
    if a_values:
        summary["frac_amax_ge_scalar"] = fraction_above(a_values, SCALAR_A_MAX)
    if v_values:
        summary["frac_vmax_above_scalar"] = fraction_above(v_values, SCALAR_V_MAX, strict=True)
    paired = [
        (max(m["a_max"] for m in r["maneuvers"]), r["v_max"]) for r in rides if r["maneuvers"]
    ]
    if len(paired) >= 3:
        try:
            summary["pearson_r_amax_vmax"] = correlation(
                [p[0] for p in paired], [p[1] for p in paired]
            )
        except CycleSimError:
            pass
    artifacts.write_json(
        out_dir / "kinematics.json",
        "kinematics",
        {"rides": rides, "summary": summary, "config": vars(cfg)},
    )
    print(f"analyze: {len(rides)} rides, {len(a_values)} maneuvers")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    analysis_dir = Path(args.analysis)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    header, rows = artifacts.read_csv(analysis_dir / "maneuvers.csv", "maneuvers")
    a_col = header.index("a_max")
    a_values = np.array([float(r[a_col]) for r in rows])
    kin = artifacts.read_json(analysis_dir / "kinematics.json", "kinematics")
    v_values = np.array([r["v_max"] for r in kin["rides"]], dtype=float)

    fit_a = fit_mle(a_values, BURR_FAMILY)
    fit_v = fit_mle(v_values, JSU_FAMILY)
    artifacts.write_fit(out_dir / "fit_amax.json", fit_a)
    artifacts.write_fit(out_dir / "fit_vmax.json", fit_v)
    print(
        f"fit a_max: {fit_a.params} converged={fit_a.converged} ks={fit_a.ks_statistic:.4f} n={fit_a.n}"
    )
    print(
        f"fit v_max: {fit_v.params} converged={fit_v.converged} ks={fit_v.ks_statistic:.4f} n={fit_v.n}"
    )
    if not args.no_figures:
        figures.fit_overlay_figure(
            a_values, fit_a.params, out_dir / "fit_amax.png",
            xlabel="maneuver max acceleration [m/s$^2$]", scalar_marker=SCALAR_A_MAX,
        )
        figures.fit_overlay_figure(
            v_values, fit_v.params, out_dir / "fit_vmax.png",
            xlabel="ride max velocity [m/s]", scalar_marker=SCALAR_V_MAX,
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    scenario, sim_section = artifacts.read_scenario(args.scenario)
    if args.lane_only:
        scenario = Scenario(network=scenario.network, lane_only=True)

    overrides = {
        "duration": args.duration,
        "step": args.step,
        "demand": args.demand,
        "p_indirect": args.p_indirect,
        "param_source": args.param_source,
        "background_through": args.background_through,
    }
    for key, value in overrides.items():
        if value is not None:
            sim_section[key] = value
    config = SimConfig(seed=args.seed, **sim_section)

    amax = vmax = None
    if config.param_source == PARAM_FITTED:
        if not args.fit_amax or not args.fit_vmax:
            print("fitted param source needs --fit-amax and --fit-vmax", file=sys.stderr)
            return EXIT_PIPELINE
        amax = artifacts.read_fit(args.fit_amax).params
        vmax = artifacts.read_fit(args.fit_vmax).params

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = run(scenario, config, amax, vmax)

    artifacts.write_steps(out_dir / "steps.csv", log)
    artifacts.write_summaries(out_dir / "summaries.json", log)
    artifacts.write_durations(out_dir / "durations.csv", evaluation.crossing_durations(log))
    if not args.no_figures:
        net = scenario.network
        trajs = [synthesize_indirect_turn(net, h) for h in HEADINGS]
        if not scenario.lane_only:
            trajs += [synthesize_direct_turn(net, h) for h in HEADINGS]
        figures.trajectory_figure(net, trajs, out_dir / "trajectories.png")
    print(
        f"simulate: spawned={log.spawned} completed={log.completed} "
        f"active_at_end={log.active_at_end} (seed={config.seed})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _summaries_path(arg: str) -> Path:
    p = Path(arg)
    return p / "summaries.json" if p.is_dir() else p


def cmd_evaluate(args) -> int:
    log = artifacts.read_summaries(_summaries_path(args.log))
    durations = evaluation.crossing_durations(log)
    if not durations:
        print("log contains no completed left-turn crossings", file=sys.stderr)
        return EXIT_PIPELINE
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    hists = evaluation.observed_kinematics_histograms(log)
    artifacts.write_hist_csv(out_dir / "hist.csv", hists)

    sides = {"simulated": np.asarray(durations)}
    if args.reference:
        reference = artifacts.read_durations(args.reference)
        report = evaluation.compare(durations, reference)
        artifacts.write_report(out_dir / "report.json", report, "simulated", "reference")
        sides["reference"] = np.asarray(reference)
        print(f"evaluate: ks={report.ks:.4f} mean sim={report.mean_a:.1f}s ref={report.mean_b:.1f}s")
    else:
        q = {str(p): float(np.quantile(durations, p)) for p in evaluation.QUANTILE_PROBES}
        artifacts.write_json(
            out_dir / "report.json",
            "report",
            {
                "ks": None,
                "sides": {
                    "a": {
                        "label": "simulated",
                        "n": len(durations),
                        "mean": float(np.mean(durations)),
                        "quantiles": q,
                    }
                },
            },
        )
        print(f"evaluate: n={len(durations)} mean={np.mean(durations):.1f}s")
    artifacts.write_ecdf_csv(out_dir / "ecdf.csv", sides)

    if not args.no_figures:
        figures.ecdf_figure(sides, out_dir / "ecdf.png", xlabel="crossing duration [s]")
        scalar_mode = log.meta.get("param_source") == PARAM_SCALAR
        figures.kinematics_hist_figure(
            hists,
            out_dir / "hist.png",
            accel_marker=SCALAR_A_MAX if scalar_mode else None,
            speed_marker=SCALAR_V_MAX if scalar_mode else None,
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

def cmd_scenario(args) -> int:
    approaches = {
        h: Approach(
            heading=h,
            lane_count=args.lanes,
            lane_width=args.lane_width,
            approach_length=args.approach_length,
            has_bike_lane=args.bike_lanes,
        )
        for h in HEADINGS
    }
    plan = SignalPlan(
        (Phase("NS", args.green, args.all_red), Phase("EW", args.green, args.all_red))
    )
    scenario = Scenario(
        network=Network(approaches=approaches, signal=plan), lane_only=args.lane_only
    )
    sim = {
        "duration": args.duration,
        "step": args.step,
        "demand": args.demand,
        "p_indirect": args.p_indirect,
        "param_source": args.param_source,
        "background_through": args.background_through,
    }
    artifacts.write_scenario(args.out, scenario, sim)
    print(f"scenario written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cyclesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit synthetic ride files with truth sidecars")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--profile", choices=PROFILES, default="realistic")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, default=None, help="GPS noise std in meters")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="parse, validate, and clean ride files")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--validation-config", default=None, help="JSON threshold overrides")
    p.add_argument("--bandwidth", type=float, default=6.0, help="Gaussian kernel bandwidth [s]")
    p.add_argument("--alpha", type=float, default=0.4, help="speed low-pass factor")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", help="extract maneuvers and per-ride max velocities")
    p.add_argument("--traces", required=True, help="directory of trace artifacts")
    p.add_argument("--out", required=True)
    p.add_argument("--a-min", type=float, default=0.05)
    p.add_argument("--t-min", type=float, default=3.0)
    p.add_argument("--dv-min", type=float, default=1.0)
    p.add_argument("--merge-gap", type=float, default=2.0)
    p.add_argument("--a-cap", type=float, default=4.0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit the kinematic distributions by MLE")
    p.add_argument("--analysis", required=True, help="directory with analyze outputs")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run the intersection microsimulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fit-amax", default=None)
    p.add_argument("--fit-vmax", default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--demand", type=float, default=None)
    p.add_argument("--p-indirect", type=float, default=None)
    p.add_argument("--lane-only", action="store_true")
    p.add_argument("--param-source", choices=[PARAM_SCALAR, PARAM_FITTED], default=None)
    p.add_argument("--background-through", type=float, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="duration ECDFs, histograms, comparison report")
    p.add_argument("--log", required=True, help="run directory or summaries.json")
    p.add_argument("--reference", default=None, help="durations.csv or summaries.json")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scenario", help="write a symmetric four-way scenario file")
    p.add_argument("--out", required=True)
    p.add_argument("--lanes", type=int, default=2)
    p.add_argument("--lane-width", type=float, default=3.5)
    p.add_argument("--approach-length", type=float, default=100.0)
    p.add_argument("--bike-lanes", action="store_true")
    p.add_argument("--green", type=float, default=27.0)
    p.add_argument("--all-red", type=float, default=3.0)
    p.add_argument("--duration", type=float, default=7200.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--demand", type=float, default=200.0)
    p.add_argument("--p-indirect", type=float, default=0.57)
    p.add_argument("--lane-only", action="store_true")
    p.add_argument("--param-source", choices=[PARAM_SCALAR, PARAM_FITTED], default=PARAM_FITTED)
    p.add_argument("--background-through", type=float, default=0.0)
    p.set_defaults(func=cmd_scenario)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InternalInconsistencyError as exc:
        print(f"simulation inconsistency: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except CycleSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
