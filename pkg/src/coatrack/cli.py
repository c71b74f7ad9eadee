"""Command-line surface: synth, fuse, track, mv-estimate, eval, bench, pipeline.

Exit codes: 0 success, 1 validation error (bad flags, missing or malformed
files), 2 runtime error. Every command accepting --seed is reproducible:
identical inputs and seed give byte-identical output files. A flat
``key = value`` config file can preset any long flag of a subcommand
(--config FILE); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import benchmarks, coa, motion, synth
from .evaluate import evaluate_detections, evaluate_tracks, format_map_table
from .fusion import FusionConfig, fuse_sequences
from .media_io import (
    FrameSequence,
    MediaFormatError,
    read_detections,
    read_ground_truth,
    read_motion_sidecar,
    read_tracks,
    write_detections,
    write_frames,
    write_ground_truth,
    write_motion_sidecar,
    write_tracks,
)
from .pipeline import clip_detections, run_pipeline, run_tracking
from .tracker import TrackerConfig


class CliError(Exception):
    """Validation failure; rendered as a one-line message, exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _load_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Apply --config key=value pairs as parser defaults; flags still win."""
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    path = Path(known.config)
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    actions = {a.dest: a for a in parser._actions}
    booleans = (argparse._StoreTrueAction, argparse._StoreFalseAction)
    overrides = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        dest = key.strip().replace("-", "_")
        value = value.strip()
        if dest not in actions:
            raise CliError(f"{path}:{lineno}: unknown option {key.strip()!r}")
        if isinstance(actions[dest], booleans):
            if value.lower() not in ("true", "false", "1", "0"):
                raise CliError(f"{path}:{lineno}: {key.strip()!r} needs true/false")
            overrides[dest] = value.lower() in ("true", "1")
        else:
            # string defaults are run through the option's type by argparse
            overrides[dest] = value
    parser.set_defaults(**overrides)
    return argv


def _require_file(path, flag: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{flag}: file not found: {p}")
    return p


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _frames(path) -> FrameSequence:
    p = Path(path)
    if not p.is_dir():
        raise CliError(f"--frames: directory not found: {p}")
    return FrameSequence(p)


def _tracker_config(args) -> TrackerConfig:
    return TrackerConfig(
        ft_threshold=args.ft,
        n_packs=args.packs,
        n_coyotes=args.coyotes,
        iterations_per_frame=args.iterations,
        size_search=not args.fixed_size,
        rng_seed=args.seed,
    )


def _add_tracker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ft", type=float, default=0.90,
                   help="acceptance / occlusion fitness threshold (default 0.90)")
    p.add_argument("--packs", type=int, default=2, help="coyote packs per target")
    p.add_argument("--coyotes", type=int, default=5, help="coyotes per pack")
    p.add_argument("--iterations", type=int, default=10, help="swarm iterations per frame")
    p.add_argument("--fixed-size", action="store_true",
                   help="freeze the box size instead of searching +/-20%%")


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("mean", "max"), default="mean",
                   help="appearance/motion fusion operator")
    p.add_argument("--iou-threshold", type=float, default=0.3,
                   help="minimum IoU for fusing two boxes (default 0.3)")
    p.add_argument("--motion-primary", choices=("mvx", "mvy"), default="mvx",
                   help="which motion stream leads the motion merge")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    if args.scenario in synth.PRESETS:
        kwargs = {}
        if args.frames is not None:
            kwargs["n_frames"] = args.frames
        if args.seed is not None:
            kwargs["seed"] = args.seed
        scenario = synth.PRESETS[args.scenario](**kwargs)
    else:
        scenario = synth.load_scenario(_require_file(args.scenario, "--scenario"))
        if args.frames is not None:
            scenario.n_frames = args.frames
        if args.seed is not None:
            scenario.seed = args.seed
    out = _out_dir(args.out)
    frames, gt = synth.generate(scenario)
    write_frames(out / "frames", frames)
    write_ground_truth(out / "gt.jsonl", gt)
    if args.emit_detections:
        visible = [g for g in gt if g.visible]
        streams = {
            "appearance": (args.jitter, args.drop, 1),
            "mvx": (args.jitter * 3.0, min(1.0, args.drop * 2.0), 2),
            "mvy": (args.jitter * 3.0, min(1.0, args.drop * 2.0), 3),
        }
        for name, (jitter, drop, salt) in streams.items():
            records = synth.corrupt_detections(visible, jitter, drop,
                                               seed=scenario.seed + salt)
            write_detections(out / f"{name}.jsonl", records)
    print(f"wrote {len(frames)} frames and {len(gt)} ground-truth records to {out}")
    return 0


def cmd_fuse(args) -> int:
    cfg = FusionConfig(iou_threshold=args.iou_threshold, method=args.method,
                       motion_primary=args.motion_primary)
    appearance = read_detections(_require_file(args.appearance, "--appearance"))
    mvx = read_detections(_require_file(args.mvx, "--mvx")) if args.mvx else []
    mvy = read_detections(_require_file(args.mvy, "--mvy")) if args.mvy else []
    fused = fuse_sequences(appearance, mvx, mvy, cfg)
    if args.frames:
        seq = _frames(args.frames)
        fused = clip_detections(fused, seq.width, seq.height)
    out = _out_dir(args.out)
    write_detections(out / "fused.jsonl", fused)
    print(f"wrote {len(fused)} fused detections to {out / 'fused.jsonl'}")
    return 0


def cmd_track(args) -> int:
    frames = _frames(args.frames)
    detections = read_detections(_require_file(args.detections, "--detections"))
    records = run_tracking(frames, detections, _tracker_config(args))
    out = _out_dir(args.out)
    write_tracks(out / "tracks.jsonl", records)
    targets = len({r.target_id for r in records})
    print(f"wrote {len(records)} track records ({targets} targets) to {out / 'tracks.jsonl'}")
    return 0


def cmd_mv_estimate(args) -> int:
    frames = _frames(args.frames)
    out = _out_dir(args.out)
    per_frame = {}
    fields = {}
    if args.from_sidecar:
        # externally extracted motion vectors replace the block matcher
        per_frame = read_motion_sidecar(_require_file(args.from_sidecar, "--from-sidecar"))
        for t, records in per_frame.items():
            fields[t] = motion.field_from_records(records, frames.dims,
                                                  args.block_size, args.search_radius)
    else:
        if len(frames) < 2:
            raise CliError("--frames: need at least 2 frames for motion estimation")
        prev = frames[0]
        for t in range(1, len(frames)):
            curr = frames[t]
            fields[t] = motion.estimate(prev, curr, args.block_size, args.search_radius)
            per_frame[t] = motion.field_to_records(fields[t], t)
            prev = curr
    write_motion_sidecar(out / "motion.mv", per_frame)
    if args.render:
        renders = [motion.render(fields[t], frames.dims) for t in sorted(fields)]
        write_frames(out / "mvx", [r[0] for r in renders])
        write_frames(out / "mvy", [r[1] for r in renders])
    print(f"wrote motion vectors for {len(per_frame)} frames to {out / 'motion.mv'}")
    return 0


def cmd_eval_det(args) -> int:
    pred = read_detections(_require_file(args.pred, "--pred"))
    gt = read_ground_truth(_require_file(args.gt, "--gt"))
    report = evaluate_detections(pred, gt, delta=args.delta)
    print(format_map_table([(args.label, {report.delta: report.mean_ap})]))
    for cls in sorted(report.per_class_ap):
        counts = report.counts[cls]
        flag = "  (no ground truth)" if cls in report.classes_without_gt else ""
        print(f"class {cls}: AP {report.per_class_ap[cls]:.4f} "
              f"tp={counts.tp} fp={counts.fp} fn={counts.fn}{flag}")
    if args.out:
        out = _out_dir(args.out)
        with open(out / "det_eval.jsonl", "w", encoding="utf-8") as f:
            for cls in sorted(report.per_class_ap):
                counts = report.counts[cls]
                f.write(json.dumps({
                    "type": "class_ap", "class": cls, "delta": report.delta,
                    "ap": report.per_class_ap[cls], "tp": counts.tp,
                    "fp": counts.fp, "fn": counts.fn,
                }) + "\n")
            f.write(json.dumps({"type": "summary", "delta": report.delta,
                                "map": report.mean_ap}) + "\n")
    return 0


def cmd_eval_track(args) -> int:
    tracks = read_tracks(_require_file(args.tracks, "--tracks"))
    gt = read_ground_truth(_require_file(args.gt, "--gt"))
    report = evaluate_tracks(tracks, gt, iou_floor=args.iou_floor)
    print(f"frames tracked: {report.frames_tracked}/{report.frames_total} "
          f"(IoU >= {args.iou_floor:g})")
    print(f"mean IoU: {report.mean_iou:.4f}")
    print(f"reacquisition latency: {report.reacquisition_latency} frames")
    if args.out:
        out = _out_dir(args.out)
        (out / "track_eval.json").write_text(json.dumps({
            "frames_tracked": report.frames_tracked,
            "frames_total": report.frames_total,
            "mean_iou": report.mean_iou,
            "reacquisition_latency": report.reacquisition_latency,
            "iou_floor": args.iou_floor,
        }, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_coa_bench(args) -> int:
    if args.function not in benchmarks.FUNCTIONS:
        raise CliError(f"--function: unknown function {args.function!r}; "
                       f"choose from {', '.join(sorted(benchmarks.FUNCTIONS))}")
    objective, (lo, hi) = benchmarks.FUNCTIONS[args.function]
    lo = args.lower if args.lower is not None else lo
    hi = args.upper if args.upper is not None else hi
    best_values = []
    for run_index in range(args.runs):
        config = coa.CoaConfig(
            n_packs=args.packs,
            n_coyotes_per_pack=args.coyotes,
            dimension=args.dim,
            lower_bounds=np.full(args.dim, lo),
            upper_bounds=np.full(args.dim, hi),
            max_iterations=args.iterations,
            rng_seed=args.seed + run_index,
        )
        result = coa.run(config, objective)
        best_values.append(result.best_fitness)
        print(f"run {run_index} (seed {args.seed + run_index}): "
              f"best_fitness {result.best_fitness:.6e} "
              f"after {result.iterations_run} iterations")
    if args.runs > 1:
        print(f"median best_fitness over {args.runs} runs: "
              f"{float(np.median(best_values)):.6e}")
    return 0


def _run_detector(template: str, frames_dir: Path, stream: str, out_file: Path) -> None:
    cmd = shlex.split(template) + ["--frames", str(frames_dir),
                                   "--stream", stream, "--out", str(out_file)]
    proc = subprocess.run(cmd)
    if proc.returncode != 0:
        raise RuntimeError(f"external detector failed for stream {stream} "
                           f"(exit {proc.returncode}): {' '.join(cmd)}")
    if not out_file.is_file():
        raise RuntimeError(f"external detector produced no file for stream {stream}")


def cmd_pipeline(args) -> int:
    frames = _frames(args.frames)
    out = _out_dir(args.out)

    def load_stream(flag_value, name):
        if flag_value:
            return read_detections(_require_file(flag_value, f"--{name}"))
        if args.detector:
            target = out / f"{name}.jsonl"
            _run_detector(args.detector, Path(args.frames), name, target)
            return read_detections(target)
        if name == "appearance":
            raise CliError("--appearance: required unless --detector is given")
        return []

    appearance = load_stream(args.appearance, "appearance")
    mvx = load_stream(args.mvx, "mvx")
    mvy = load_stream(args.mvy, "mvy")

    fusion_config = FusionConfig(iou_threshold=args.iou_threshold, method=args.method,
                                 motion_primary=args.motion_primary)
    result = run_pipeline(frames, appearance, mvx, mvy, fusion_config,
                          _tracker_config(args))
    write_detections(out / "fused.jsonl", result.fused)
    write_tracks(out / "tracks.jsonl", result.tracks)
    speed = result.speed
    (out / "speed.json").write_text(json.dumps({
        "stage_ms": speed.stage_ms, "fps": speed.fps,
        "frames_timed": speed.frames_timed,
    }, indent=2) + "\n", encoding="utf-8")
    stage_text = "  ".join(f"{k}={v:.2f}ms" for k, v in speed.stage_ms.items())
    print(f"{len(frames)} frames: {stage_text}  overall {speed.fps:.1f} fps")
    print(f"wrote fused.jsonl, tracks.jsonl, speed.json to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="coatrack",
                     description="Action-box fusion, COA tracking and evaluation tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--scenario", default="linear",
                   help=f"preset ({', '.join(sorted(synth.PRESETS))}) or scenario file")
    p.add_argument("--frames", type=int, help="number of frames (default per scenario)")
    p.add_argument("--seed", type=int, help="scenario seed (default per scenario)")
    p.add_argument("--jitter", type=float, default=1.0, help="detection box jitter, px")
    p.add_argument("--drop", type=float, default=0.05, help="detection drop rate")
    p.add_argument("--no-detections", dest="emit_detections", action="store_false",
                   help="skip writing the corrupted detection streams")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fuse", help="fuse appearance and motion detection streams")
    p.add_argument("--appearance", required=True, help="appearance detections (JSONL)")
    p.add_argument("--mvx", help="X-motion detections (JSONL)")
    p.add_argument("--mvy", help="Y-motion detections (JSONL)")
    p.add_argument("--frames", help="frame directory; clips output boxes when given")
    _add_fusion_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("track", help="run the COA tracker over a frame sequence")
    p.add_argument("--frames", required=True, help="frame directory")
    p.add_argument("--detections", required=True,
                   help="detections (JSONL); first non-empty frame initializes targets")
    _add_tracker_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("mv-estimate", help="block-matching motion vectors for a sequence")
    p.add_argument("--frames", required=True, help="frame directory")
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--search-radius", type=int, default=8)
    p.add_argument("--from-sidecar",
                   help="ingest externally extracted vectors (frame bx by dx dy "
                        "lines) instead of running the block matcher")
    p.add_argument("--render", action="store_true",
                   help="also write the MV component images (mvx/, mvy/)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_mv_estimate)

    p = sub.add_parser("eval-det", help="frame-AP / mAP of detections against ground truth")
    p.add_argument("--pred", required=True, help="predicted detections (JSONL)")
    p.add_argument("--gt", required=True, help="ground truth (JSONL)")
    p.add_argument("--delta", type=float, default=0.2, help="IoU threshold (default 0.2)")
    p.add_argument("--label", default="fused", help="row label for the report table")
    p.add_argument("--out", help="directory for det_eval.jsonl")
    p.set_defaults(func=cmd_eval_det)

    p = sub.add_parser("eval-track", help="tracking success against ground truth")
    p.add_argument("--tracks", required=True, help="track records (JSONL)")
    p.add_argument("--gt", required=True, help="ground truth (JSONL)")
    p.add_argument("--iou-floor", type=float, default=0.5)
    p.add_argument("--out", help="directory for track_eval.json")
    p.set_defaults(func=cmd_eval_track)

    p = sub.add_parser("coa-bench", help="run the optimizer on a benchmark function")
    p.add_argument("--function", default="sphere")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--packs", type=int, default=5)
    p.add_argument("--coyotes", type=int, default=5)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--lower", type=float, help="override the function's lower bound")
    p.add_argument("--upper", type=float, help="override the function's upper bound")
    p.add_argument("--runs", type=int, default=1, help="seeds seed..seed+runs-1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_coa_bench)

    p = sub.add_parser("pipeline", help="fuse detection streams and track, end to end")
    p.add_argument("--frames", required=True, help="frame directory")
    p.add_argument("--appearance", help="appearance detections (JSONL)")
    p.add_argument("--mvx", help="X-motion detections (JSONL)")
    p.add_argument("--mvy", help="Y-motion detections (JSONL)")
    p.add_argument("--detector",
                   help="external detector command for missing streams; invoked as "
                        "CMD --frames DIR --stream NAME --out FILE")
    _add_fusion_flags(p)
    _add_tracker_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)

    for sp in sub.choices.values():
        sp.add_argument("--config", help="flat key=value file presetting these flags")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # apply --config defaults to the chosen subparser before the real parse
        subparsers = next(a for a in parser._actions
                          if isinstance(a, argparse._SubParsersAction))
        if argv and argv[0] in subparsers.choices:
            _load_config_defaults(subparsers.choices[argv[0]], argv[1:])
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MediaFormatError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
