"""Command-line entry points.

Exit status: 0 on success, 1 on usage errors, 2 on format or processing
errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .bench import benchmark
from .config import flow_params_from, parse_roi, pipeline_from, read_kv, scenario_from, scenario_text
from .errors import SlipflowError
from .flow import DenseFlow, FarnebackParams
from .formats import (
    EventRecord,
    read_events_jsonl,
    read_sequence,
    read_truth_jsonl,
    render_flow_overlay,
    truth_records,
    write_events_jsonl,
    write_flo,
    write_ppm,
    write_sequence,
    write_truth_jsonl,
)
from .lk import detect_features, track_sparse
from .metrics import evaluate
from .sim import generate_sequence
from .slip import SlipDetector

EXIT_OK, EXIT_USAGE, EXIT_PROCESSING = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _frames(directory: str, minimum: int = 2):
    path = Path(directory)
    if not path.is_dir():
        raise UsageError(f"input directory {directory!r} does not exist")
    frames = read_sequence(path)
    if len(frames) < minimum:
        raise UsageError(f"need at least {minimum} frames (frame_NNNNNN.pgm) in {directory!r}, found {len(frames)}")
    return frames


def cmd_sim(args) -> int:
    scenario = scenario_from(read_kv(args.scenario))
    frames, truth = generate_sequence(scenario)
    out = Path(args.out)
    write_sequence(frames, out)
    write_truth_jsonl(truth_records(truth), out / "truth.jsonl")
    (out / "scenario.txt").write_text(scenario_text(scenario), encoding="utf-8")
    print(f"wrote {len(frames)} frames and truth.jsonl to {out}")
    return EXIT_OK


def cmd_flow(args) -> int:
    frames = _frames(args.inp)
    params = flow_params_from(read_kv(args.params)) if args.params else FarnebackParams()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    engine = DenseFlow(params)
    for k in range(1, len(frames)):
        flow = engine(frames[k - 1], frames[k])
        write_flo(flow, out / f"flow_{k:06d}.flo")
        if args.overlay:
            rgb = render_flow_overlay(frames[k - 1], flow, args.stride, args.gain)
            write_ppm(rgb, out / f"overlay_{k:06d}.ppm")
    print(f"wrote {len(frames) - 1} flow fields to {out}")
    return EXIT_OK


def cmd_track(args) -> int:
    frames = _frames(args.inp)
    with open(args.out, "w", encoding="utf-8") as fh:
        for k in range(1, len(frames)):
            pts = detect_features(frames[k - 1], args.max_points, args.quality, args.min_distance)
            tracked = track_sparse(frames[k - 1], frames[k], pts, args.window_radius, args.levels)
            rows = [
                {
                    "x": p.position[0],
                    "y": p.position[1],
                    "dx": None if p.displacement is None else p.displacement[0],
                    "dy": None if p.displacement is None else p.displacement[1],
                    "status": p.status.value,
                }
                for p in tracked
            ]
            fh.write(json.dumps({"frame": k, "points": rows}) + "\n")
    print(f"tracked {len(frames) - 1} frame pairs into {args.out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    frames = _frames(args.inp)
    try:
        roi = parse_roi(args.roi) if args.roi else None
    except (ValueError, SlipflowError) as exc:
        raise UsageError(f"--roi: {exc}") from None
    kv = read_kv(args.config) if args.config else {}
    config = pipeline_from(kv, roi)
    detector = SlipDetector(config)
    records = [EventRecord.from_event(e) for e in detector.run(frames)]
    write_events_jsonl(records, args.out)
    slips = sum(r.state == "SLIPPING" for r in records)
    print(f"{len(records)} events ({slips} SLIPPING) written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    result = evaluate(read_events_jsonl(args.events), read_truth_jsonl(args.truth), args.latency_bound)
    print("\n".join(result.lines()))
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        w, h = (int(s) for s in args.size.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like 320x240, got {args.size!r}") from None
    if args.frames < 1:
        raise UsageError("--frames must be >= 1")
    print("\n".join(benchmark(w, h, args.frames).lines()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slipflow", description="Optical-flow slip detection for a camera-in-gripper.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="render a synthetic scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("flow", help="dense flow for every consecutive frame pair")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params")
    p.add_argument("--overlay", action="store_true")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--gain", type=float, default=5.0)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("track", help="sparse Lucas-Kanade on detected corners")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-points", type=int, default=100)
    p.add_argument("--quality", type=float, default=0.01)
    p.add_argument("--min-distance", type=float, default=5.0)
    p.add_argument("--window-radius", type=int, default=7)
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("detect", help="run the slip detector, write an event log")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--roi", help="cx,cy,r[,margin] in input pixels")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score an event log against a truth track")
    p.add_argument("--events", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--latency-bound", type=int, default=6, help="frames after onset (default: debounce 3 + 3)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="frames per second of the dense pipeline")
    p.add_argument("--size", default="320x240")
    p.add_argument("--frames", type=int, default=300)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SlipflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
