"""Batch entry points: simulate | replay | render | eval | serve, plus the
pattern-provider request/tile helpers.

Exit codes: 0 success, 1 runtime failure, 2 input/validation error.
Machine-readable JSON goes to stdout; diagnostics go to stderr.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import (
    DEFAULT_GEOMETRY,
    DeviceGeometry,
    Pose2D,
    load_surface_map,
    save_surface_map,
)
from .motion import DetectorConfig
from .patterns import (
    ColorSample,
    PatternResponse,
    TileSpec,
    build_request,
    segment_regions,
    synthesize_tile,
)
from .pipeline import PipelineConfig, run_replay
from .renderer import RenderConfig, render_screen
from .scenarios import BUILTIN_SCENARIOS, get_builtin
from .simulator import (
    EvaluationError,
    MagnetSetup,
    Scenario,
    ScenarioError,
    TraceFormatError,
    capture_surface,
    evaluate,
    load_scenario,
    plan_trajectory,
    read_trace,
    read_truth,
    synthesize_imu,
    write_trace,
    write_truth,
)
from .tracker import AnchorStds, MagnetModel, NoiseParams

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2

ESTIMATE_COLUMNS = (
    "t", "p_x", "p_y", "theta", "v_x", "v_y", "b_ax", "b_ay", "b_gz", "cov_trace"
)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def parse_angle(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("deg"):
        return math.radians(float(text[:-3]))
    if text.endswith("rad"):
        return float(text[:-3])
    return float(text)


def parse_pose(text: str) -> Pose2D:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"pose must be 'x,y,theta[deg|rad]', got {text!r}")
    return Pose2D(float(parts[0]), float(parts[1]), parse_angle(parts[2]))


def _resolve_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    if ref in BUILTIN_SCENARIOS:
        return get_builtin(ref)
    raise ScenarioError(
        f"{ref!r} is neither a scenario file nor a built-in "
        f"({sorted(BUILTIN_SCENARIOS)})", "scenario"
    )


def cmd_simulate(args) -> int:
    try:
        scenario = _resolve_scenario(args.scenario)
        if args.seed is not None:
            from dataclasses import replace

            scenario = replace(scenario, seed=args.seed)
        truth = plan_trajectory(scenario)
        trace = synthesize_imu(truth, scenario)
        surface = capture_surface(scenario, truth)
    except ScenarioError as exc:
        field = f" (field: {exc.field_name})" if exc.field_name else ""
        return _fail(f"invalid scenario: {exc}{field}", EXIT_INPUT)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    trace_path = prefix.with_name(prefix.name + ".trace.jsonl")
    truth_path = prefix.with_name(prefix.name + ".truth.jsonl")
    map_path = prefix.with_name(prefix.name + ".map.png")
    write_trace(trace_path, trace)
    write_truth(truth_path, truth)
    save_surface_map(surface, map_path)
    print(json.dumps({
        "trace": str(trace_path),
        "truth": str(truth_path),
        "map": str(map_path),
        "samples": len(trace),
        "seed": scenario.seed,
        "capture_pose": list(truth.capture_pose.as_array()) if truth.capture_pose else None,
    }))
    return EXIT_OK


def _pipeline_config_from_file(path, placement: Pose2D) -> PipelineConfig:
    cfg = PipelineConfig(placement_pose=placement)
    if path is None:
        return cfg
    data = json.loads(Path(path).read_text())
    if "detector" in data:
        cfg.detector = DetectorConfig(**data["detector"])
    if "noise" in data:
        cfg.noise = NoiseParams(**data["noise"])
    if "anchor" in data:
        cfg.anchor_stds = AnchorStds(**data["anchor"])
    if "placement_pose" in data:
        cfg.placement_pose = Pose2D(*data["placement_pose"])
    if "zupt" in data:
        cfg.zupt_enabled = bool(data["zupt"])
    if "zaru" in data:
        cfg.zaru_enabled = bool(data["zaru"])
    if data.get("magnet") is not None:
        m = data["magnet"]
        cfg.magnet = MagnetSetup(
            model=MagnetModel(position_mm=m["position_mm"], moment=m["moment"]),
            ambient_uT=m.get("ambient_uT", (0.0, 0.0, 0.0)),
            sensor_height_mm=float(m.get("sensor_height_mm", 5.0)),
        )
    return cfg


def write_estimates_csv(path, result) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ESTIMATE_COLUMNS)
        for t, mean, trace in zip(result.times, result.means, result.cov_traces):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in mean] + [repr(float(trace))])


def read_estimates_csv(path):
    estimates = []
    with open(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != ESTIMATE_COLUMNS:
            raise ValueError(f"unexpected estimates header: {header}")
        for row in reader:
            t = float(row[0])
            estimates.append((t, Pose2D(float(row[1]) * 1e3, float(row[2]) * 1e3, float(row[3]))))
    return estimates


def cmd_replay(args) -> int:
    try:
        samples = read_trace(args.trace)
    except TraceFormatError as exc:
        return _fail(f"malformed trace: {exc}", EXIT_INPUT)
    except OSError as exc:
        return _fail(str(exc), EXIT_INPUT)

    truth = None
    truth_path = args.truth
    if truth_path is None:
        guess = Path(str(args.trace).replace(".trace.jsonl", ".truth.jsonl"))
        if guess != Path(args.trace) and guess.exists():
            truth_path = guess
    if truth_path is not None:
        try:
            truth = read_truth(truth_path)
        except (TraceFormatError, OSError) as exc:
            return _fail(f"malformed truth: {exc}", EXIT_INPUT)

    placement = Pose2D.identity()
    if truth is not None:
        first = truth.first_contact_index()
        if first is not None:
            placement = truth.pose_at(first)
    try:
        config = _pipeline_config_from_file(args.config, placement)
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(f"invalid config: {exc}", EXIT_INPUT)
    if args.no_zupt:
        config.zupt_enabled = False
        config.zaru_enabled = False

    if args.map is not None:
        try:
            load_surface_map(args.map)
        except (OSError, ValueError, KeyError) as exc:
            return _fail(f"invalid map: {exc}", EXIT_INPUT)

    result = run_replay(samples, config)
    metrics = None
    if truth is not None and result.pose_estimates:
        try:
            metrics = evaluate(truth, result.pose_estimates)
        except EvaluationError as exc:
            return _fail(str(exc), EXIT_INPUT)

    summary = {
        "samples": len(samples),
        "tracked": len(result.times),
        "events": [{"name": e.name, "t": e.t} for e in result.events],
        "metrics": metrics,
    }
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        est_path = prefix.with_name(prefix.name + ".estimates.csv")
        write_estimates_csv(est_path, result)
        prefix.with_name(prefix.name + ".summary.json").write_text(json.dumps(summary, indent=2))
        summary["estimates"] = str(est_path)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        surface = load_surface_map(args.map)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(f"cannot load map: {exc}", EXIT_INPUT)
    try:
        pose = parse_pose(args.pose)
    except ValueError as exc:
        return _fail(f"bad pose: {exc}", EXIT_INPUT)
    geometry = DEFAULT_GEOMETRY
    if args.geometry is not None:
        try:
            geometry = DeviceGeometry(**json.loads(Path(args.geometry).read_text()))
        except (OSError, TypeError, ValueError) as exc:
            return _fail(f"bad geometry: {exc}", EXIT_INPUT)
    try:
        fill = tuple(int(v) for v in args.fill.split(","))
        cfg = RenderConfig(fill_color=fill, sampling=args.sampling)
    except ValueError as exc:
        return _fail(f"bad render config: {exc}", EXIT_INPUT)
    frame = render_screen(pose, geometry, surface, cfg)
    Image.fromarray(frame).save(args.out, format="PNG")
    print(json.dumps({"out": args.out, "size": [frame.shape[1], frame.shape[0]]}))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        truth = read_truth(args.truth)
        estimates = read_estimates_csv(args.estimates)
    except (TraceFormatError, OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    try:
        metrics = evaluate(truth, estimates)
    except EvaluationError as exc:
        return _fail(str(exc), EXIT_INPUT)
    print(json.dumps(metrics))
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import run_server

    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    run_server(args.port, args.max_sessions, args.decimation)
    return EXIT_OK


def cmd_pattern_request(args) -> int:
    try:
        img = np.asarray(Image.open(args.environment).convert("RGB"), dtype=np.uint8)
        sample = ColorSample(
            rgb=tuple(int(v) for v in args.sample.split(",")),
            illumination_gain=args.gain,
        )
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    regions = segment_regions(img, args.grid)
    request = build_request(sample, regions)
    print(json.dumps(request.to_json()))
    return EXIT_OK


def cmd_pattern_tile(args) -> int:
    try:
        raw = json.loads(Path(args.response).read_text())
        spec = raw["tile_spec"]
        response = PatternResponse(
            chosen_region_id=int(raw["chosen_region_id"]),
            tile_spec=TileSpec(
                base_rgb=tuple(spec["base_rgb"]),
                variation_rgb_amplitude=tuple(spec.get("variation_rgb_amplitude", (8, 8, 8))),
                tile_px=int(spec.get("tile_px", 128)),
            ),
        )
        tile = synthesize_tile(response, args.seed)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    Image.fromarray(tile).save(args.out, format="PNG")
    print(json.dumps({"out": args.out, "tile_px": response.tile_spec.tile_px}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deskglass",
        description="Surface-anchored tracking, rendering, simulation, and serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario to trace/truth/map files")
    p.add_argument("scenario", help="scenario JSON path or built-in name")
    p.add_argument("out_prefix", help="output file prefix")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="run a recorded trace through the tracker")
    p.add_argument("trace", help="trace .jsonl path")
    p.add_argument("--map", default=None, help="surface map PNG (validated if given)")
    p.add_argument("--truth", default=None, help="ground-truth sidecar (auto-detected)")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--out", default=None, help="output prefix for estimates/summary")
    p.add_argument("--no-zupt", action="store_true", help="disable ZUPT/ZARU updates")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("render", help="render one camouflage frame")
    p.add_argument("map", help="surface map PNG (with JSON sidecar)")
    p.add_argument("out", help="output PNG path")
    p.add_argument("--pose", required=True, help="pose as 'x,y,theta[deg|rad]' (mm)")
    p.add_argument("--geometry", default=None, help="device geometry JSON path")
    p.add_argument("--sampling", default="bilinear", choices=["nearest", "bilinear"])
    p.add_argument("--fill", default="24,24,24", help="fill color R,G,B")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="compare an estimates CSV against ground truth")
    p.add_argument("truth", help="ground-truth .jsonl path")
    p.add_argument("estimates", help="estimates CSV from replay")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the websocket session server")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--max-sessions", type=int, default=32)
    p.add_argument("--decimation", type=int, default=5)
    p.add_argument("--log-level", default="info")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("pattern-request", help="dump a pattern-provider request")
    p.add_argument("environment", help="environment photo (PNG/JPEG)")
    p.add_argument("--sample", required=True, help="sampled color R,G,B")
    p.add_argument("--gain", type=float, default=1.0, help="illumination gain")
    p.add_argument("--grid", type=int, default=8)
    p.set_defaults(func=cmd_pattern_request)

    p = sub.add_parser("pattern-tile", help="synthesize a tile from a response JSON")
    p.add_argument("response", help="pattern response JSON path")
    p.add_argument("out", help="output PNG path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pattern_tile)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failures distinct from input errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
