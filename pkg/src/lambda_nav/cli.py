"""Command-line entry point: ``lambda-nav run | risk-profile | map-dump``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ScenarioConfig, resolve_config
from .errors import LambdaNavError
from .planner import ControlInput, VehicleState
from .risk import expected_path_risk
from .sim import ScenarioResult, perception_sweep, run_scenario, write_trace

log = logging.getLogger("lambda_nav")

EXIT_OK, EXIT_ERROR, EXIT_NOT_REACHED = 0, 1, 2


def summarize(cfg: ScenarioConfig, res: ScenarioResult) -> dict:
    trace = res.trace
    driven = [r for r in trace if not r.event.startswith(("goal", "stall", "timeout"))] or trace
    path_length = sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(trace, trace[1:]))
    crossing = crossing_speeds(trace)
    return {
        "scenario": cfg.name,
        "status": res.status,
        "goal_reached": res.goal_reached,
        "total_time": trace[-1].t,
        "max_expected_risk": max(r.expected_risk for r in driven),
        "max_ground_truth_risk": max(r.ground_truth_risk for r in driven),
        "min_crossing_speed": min(crossing) if crossing else None,
        "path_length": path_length,
        "seed": cfg.seed,
        "r_threshold": cfg.planner.r_threshold,
    }


def crossing_speeds(trace) -> list[float]:
    """Commanded speeds on ticks between the first climb and the following off-obstacle tag."""
    out, inside = [], False
    for r in trace:
        if "climb" in r.event:
            inside = True
        if inside and "off_obstacle" in r.event:
            break
        if inside:
            out.append(r.v)
    return out


def _run_one(cfg: ScenarioConfig, out: Path) -> str:
    res = run_scenario(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_trace(res.trace, out / "trace.csv")
    res.field.to_csv(out / "lambda_field.csv")
    res.dem.to_csv(out / "dem.csv")
    (out / "summary.json").write_text(json.dumps(summarize(cfg, res), indent=2) + "\n")
    log.info("%s: %s after %.1f s", cfg.name, res.status, res.trace[-1].t)
    return res.status


def _configure(path, args) -> ScenarioConfig:
    cfg = resolve_config(path)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threshold is not None:
        cfg = cfg.with_threshold(args.threshold)
    return cfg


def cmd_run(args) -> int:
    cfgs = [_configure(p, args) for p in args.config]
    out = Path(args.out)
    dirs = [out] if len(cfgs) == 1 else [out / Path(p).stem for p in args.config]
    if args.jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            statuses = list(ex.map(_run_one, cfgs, dirs))
    else:
        statuses = [_run_one(c, d) for c, d in zip(cfgs, dirs)]
    return EXIT_OK if all(s == "goal" for s in statuses) else EXIT_NOT_REACHED


def read_path_csv(path) -> list[tuple[float, float, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"x", "y", "v"} - set(reader.fieldnames or ())
        if missing:
            raise LambdaNavError(f"{path}: missing columns {sorted(missing)}")
        for i, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["x"]), float(row["y"]), float(row["v"])))
            except ValueError:
                raise LambdaNavError(f"{path}:{i}: non-numeric value") from None
    if not rows:
        raise LambdaNavError(f"{path}: no path rows")
    return rows


def path_trajectory(rows):
    """Turn x,y,v rows (v = speed towards the next row) into a start state and trajectory."""
    heads = []
    for i in range(len(rows)):
        j = min(i, len(rows) - 2)
        if j < 0:
            heads.append(0.0)
        else:
            (x0, y0, _), (x1, y1, _) = rows[j], rows[j + 1]
            heads.append(math.atan2(y1 - y0, x1 - x0))
    states = [VehicleState(x, y, th) for (x, y, _), th in zip(rows, heads)]
    if len(rows) == 1:
        return None, [(states[0], ControlInput(rows[0][2], 0.0))]
    traj = [(states[i], ControlInput(rows[i - 1][2], 0.0)) for i in range(1, len(rows))]
    return states[0], traj


def cmd_risk_profile(args) -> int:
    cfg = _configure(args.config, args)
    dem, field = perception_sweep(cfg, passes=args.passes)
    start, traj = path_trajectory(read_path_csv(args.path))
    prof = expected_path_risk(field, dem, traj, cfg.wheel, cfg.planner.track_width, start=start)
    sys.stdout.write(prof.to_csv())
    log.info("expected risk %.6g J", prof.expected_risk)
    return EXIT_OK


def cmd_map_dump(args) -> int:
    cfg = _configure(args.config, args)
    dem, field = perception_sweep(cfg, passes=args.passes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    field.to_csv(out / "lambda_field.csv")
    dem.to_csv(out / "dem.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lambda-nav", description="Risk-aware Lambda-Field navigation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--threshold", type=float, default=None, help="override planner.r_threshold (J)")

    p = sub.add_parser("run", help="run closed-loop scenarios")
    p.add_argument("config", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", "--batch", type=int, default=1, dest="jobs",
                   help="run several configs in parallel processes")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("risk-profile", help="per-cell risk of a path over a perceived map")
    p.add_argument("config")
    p.add_argument("path", help="CSV with columns x,y,v")
    p.add_argument("--passes", type=int, default=1, help="perception sweeps along the reference")
    common(p)
    p.set_defaults(func=cmd_risk_profile)

    p = sub.add_parser("map-dump", help="write the perceived DEM and Lambda-Field")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--passes", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_map_dump)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LAMBDA_NAV_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "passes", 0) < 0:
        print("error: --passes must be >= 0", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (LambdaNavError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
