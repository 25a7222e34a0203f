"""Command-line interface.

    grapecount simulate   --config CFG --seed N --output stream.jsonl
    grapecount count      stream.jsonl --output report.json [--markers m.txt]
    grapecount experiment --config CFG --runs 10 --seed 7 --output summary.json
    grapecount oracle     --config CFG --seed N
    grapecount markers    report.json --output m.txt

Exit codes: 0 success, 1 bad input, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import sim
from .config import ConfigError, load_config, pipeline_config_from_dict
from .counter import CounterError, format_markers
from .locator import LocatorError
from .pipeline import CountReport, PipelineConfig, dumps, process_stream, run_experiment
from .stream import StreamError, StreamHeader, read_stream, write_stream
from .tracker import TrackerError

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    exp = load_config(args.config)
    scene = sim.generate_scene(exp.scene)
    poses = sim.trajectory_poses(scene, exp.trajectory, args.seed)
    header = StreamHeader(exp.rig.k_color, exp.rig.k_depth, exp.rig.color_from_depth, exp.pipeline.to_dict())
    out = Path(args.output)
    frames = sim.synthesize_run(scene, poses, exp.rig, exp.noise, args.seed)
    write_stream(out, header, frames, depth_dir=f"{out.stem}_depth")
    print(f"wrote {len(poses)} frames, {len(scene)} bunches -> {out}", file=sys.stderr)
    return EXIT_OK


def _count_config(args, header_configs: dict) -> PipelineConfig:
    if args.config:
        cfg = load_config(args.config).pipeline
    else:
        cfg = pipeline_config_from_dict(header_configs)
    if args.min_confidence is not None:
        cfg = replace(cfg, min_confidence=args.min_confidence)
    return cfg


def cmd_count(args) -> int:
    header, frames = read_stream(args.stream)
    cfg = _count_config(args, header.configs)
    report = process_stream(frames, cfg, header)
    _emit(dumps(report.to_dict()), args.output)
    if args.markers:
        Path(args.markers).write_text(format_markers(report.records, cfg.counter.threshold), encoding="utf-8")
    print(f"count: {report.count}", file=sys.stderr)
    return EXIT_OK


def cmd_experiment(args) -> int:
    exp = load_config(args.config)
    if args.min_confidence is not None:
        exp = replace(exp, pipeline=replace(exp.pipeline, min_confidence=args.min_confidence))
    if args.runs < 1:
        raise ConfigError("--runs must be >= 1")
    summary = run_experiment(exp, args.runs, args.seed, workers=args.workers)
    _emit(dumps(summary.to_dict()), args.output)
    if args.output:
        run_dir = Path(args.output).with_suffix(".runs")
        run_dir.mkdir(exist_ok=True)
        for i, rep in enumerate(summary.reports):
            (run_dir / f"run_{i:02d}.json").write_text(dumps(rep.to_dict()), encoding="utf-8")
    for i, c in enumerate(summary.counts, start=1):
        print(f"run {i:2d}: {c}", file=sys.stderr)
    print(f"mean: {summary.mean}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    exp = load_config(args.config)
    scene = sim.generate_scene(exp.scene)
    poses = sim.trajectory_poses(scene, exp.trajectory, args.seed)
    n = sim.oracle_count(scene, poses, exp.rig.k_color, exp.pipeline.locator, exp.noise.occlusion_radius)
    _emit(dumps({"oracle_count": n, "bunches": len(scene), "frames": len(poses), "seed": args.seed}), args.output)
    return EXIT_OK


def cmd_markers(args) -> int:
    try:
        data = json.loads(Path(args.report).read_text(encoding="utf-8"))
        report = CountReport.from_dict(data)
        radius = float(data["config"]["counter"]["threshold"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise StreamError(f"{args.report}: not a count report ({exc})") from exc
    _emit(format_markers(report.records, radius), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grapecount", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, output_required=False):
        p.add_argument("--config", metavar="PATH", help="YAML/JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", metavar="PATH", required=output_required, help="output file (default: stdout)")

    p = sub.add_parser("simulate", help="scene + trajectory -> observation stream")
    common(p, output_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("count", help="observation stream -> count report")
    p.add_argument("stream")
    p.add_argument("--config", metavar="PATH", help="overrides configs in the stream header")
    p.add_argument("--output", metavar="PATH")
    p.add_argument("--markers", metavar="PATH", help="also write the marker file")
    p.add_argument("--min-confidence", type=float, default=None)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("experiment", help="n simulated runs -> run summary")
    common(p)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--min-confidence", type=float, default=None)
    p.add_argument("--workers", type=int, default=1, help="parallel processes (results do not depend on it)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", help="scene + trajectory -> brute-force countable bunches")
    common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("markers", help="count report -> marker file")
    p.add_argument("report")
    p.add_argument("--output", metavar="PATH")
    p.set_defaults(func=cmd_markers)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CounterError, LocatorError, TrackerError, sim.SceneError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StreamError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
