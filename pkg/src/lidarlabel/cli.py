"""Batch entry points for every pipeline stage.

Each subcommand reads and writes the same project layout the HTTP
service does, and the mutating ones go through the exact engine
functions the service calls, so a scripted run and an interactive
session produce identical edit logs for identical inputs. Every
subcommand takes --json for machine-readable output; exit status is 0
on success, 1 with a diagnostic on stderr otherwise, 2 for usage
errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from lidarlabel import refine, sot
from lidarlabel.evalmod import ap_report, f1_report
from lidarlabel.geometry import CLASSES, Box7
from lidarlabel.ground import build_height_grid
from lidarlabel.server import (
    Engine,
    apply_track_op,
    autolabel_sequence,
    propagate_from_box,
)
from lidarlabel.store import ConflictError, ProjectStore, StoreError
from lidarlabel.synth import (
    AgentSpec,
    SceneConfig,
    generate_scene,
    synth_detector,
)

# agent casts for quick scene generation without a config file
PRESETS = {
    "small": [
        dict(class_id="vehicle", start=(-30, -6), heading=0.0, speed=6.0),
        dict(class_id="vehicle", start=(25, 6), heading=3.14159, speed=5.0,
             trajectory="stop_and_go", move_frames=25, stop_frames=15),
        dict(class_id="pedestrian", start=(0, -15), heading=1.5708,
             speed=1.2),
    ],
    "crossing": [
        dict(class_id="vehicle", start=(-35, -3), heading=0.0, speed=7.0),
        dict(class_id="vehicle", start=(3, -35), heading=1.5708, speed=6.0),
        dict(class_id="bus", start=(-35, 8), heading=0.0, speed=4.0,
             trajectory="stop_and_go", move_frames=30, stop_frames=20),
        dict(class_id="cyclist", start=(20, 20), heading=-2.0, speed=4.0,
             trajectory="arc", turn_rate=0.15),
        dict(class_id="pedestrian", start=(-8, 12), heading=-0.8, speed=1.3),
    ],
    "crowd": (
        [dict(class_id="vehicle", start=(-38 + 7 * k, -20 + 4 * k),
              heading=0.3 * k, speed=3.0 + 0.8 * k) for k in range(8)]
        + [dict(class_id="pedestrian", start=(-20 + 5 * k, 15 - 3 * k),
                heading=0.7 * k, speed=0.9 + 0.1 * k) for k in range(6)]
        + [dict(class_id="cyclist", start=(10 - 8 * k, -25 + 9 * k),
                heading=1.0 + 0.5 * k, speed=3.5, trajectory="arc",
                turn_rate=0.1 + 0.05 * k) for k in range(3)]
        + [dict(class_id="truck", start=(30, -30), heading=2.2, speed=4.5),
           dict(class_id="bus", start=(-30, 30), heading=-0.7, speed=3.5,
                trajectory="stop_and_go"),
           dict(class_id="motorcycle", start=(0, 0), heading=0.5,
                speed=8.0)]
    ),
}


def _emit(args, result: dict, human: str) -> int:
    if args.json:
        print(json.dumps(result, indent=1, sort_keys=True))
    else:
        print(human)
    return 0


def _engine(args) -> Engine:
    store = ProjectStore(args.project)
    store.load_manifest(check_files=False)  # fail fast on a bad root
    return Engine(store)


def _head_revision(engine: Engine, args) -> int:
    if getattr(args, "revision", None) is not None:
        return args.revision
    return engine.store.revision(args.sequence)


# subcommand bodies ---------------------------------------------------------

def cmd_synth(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    agents_raw = overrides.pop("agents", None)
    if agents_raw is None:
        agents_raw = PRESETS[args.preset]
    agents = [a if isinstance(a, AgentSpec) else AgentSpec(**a)
              for a in agents_raw]
    fields = dict(
        duration=args.duration, frame_rate=args.frame_rate,
        density=args.density, noise_sigma=args.noise_sigma,
        ground_density=args.ground_density, seed=args.seed,
    )
    for key, flag_value in fields.items():
        if flag_value is not None:
            overrides[key] = flag_value
    overrides.setdefault("duration", 60)
    if "bounds" in overrides:
        overrides["bounds"] = tuple(overrides["bounds"])
    config = SceneConfig(agents=agents, **overrides)
    seq = generate_scene(config)
    dets = None
    if not args.no_detections:
        dets = synth_detector(seq, dropout=args.dropout,
                              fp_rate=args.fp_rate,
                              box_noise=args.box_noise, seed=config.seed)
    store = ProjectStore(args.out)
    try:
        store.load_manifest(check_files=False)
    except StoreError:
        store.create_project()
    store.add_sequence(args.sequence, seq, detections=dets)
    n_pts = sum(len(f) for f in seq.frames)
    result = {
        "project": args.out,
        "sequence": args.sequence,
        "frames": len(seq.frames),
        "tracks": len(seq.gt_tracks),
        "points": n_pts,
        "detections": dets is not None,
        "seed": config.seed,
    }
    return _emit(args, result,
                 f"wrote {args.sequence}: {len(seq.frames)} frames, "
                 f"{len(seq.gt_tracks)} gt tracks, {n_pts} points")


def cmd_autolabel(args) -> int:
    engine = _engine(args)
    sid = args.sequence
    with engine.lock(sid):
        doc = autolabel_sequence(engine, sid, _head_revision(engine, args),
                                 score_floor=args.score_floor,
                                 nms_iou=args.nms_iou)
    return _emit(args, doc,
                 f"staged {len(doc['pending'])} tracks "
                 f"({len(doc['flagged'])} flagged), "
                 f"revision {doc['revision']}")


def cmd_propagate(args) -> int:
    engine = _engine(args)
    sid = args.sequence
    box = Box7(*args.box)
    with engine.lock(sid):
        doc = propagate_from_box(engine, sid, _head_revision(engine, args),
                                 args.frame, args.class_id, box,
                                 horizon=args.n, track_id=args.track_id)
    return _emit(args, doc,
                 f"track {doc['track_id']}: {doc['n_entries']} entries "
                 f"appended, revision {doc['revision']}"
                 + (f" ({doc['notice']})" if doc["notice"] else ""))


def cmd_refine(args) -> int:
    engine = _engine(args)
    sid = args.sequence
    if args.op == "filter":
        tracks, revision = engine.store.load_annotations(sid)
        info = engine.store.sequence_info(sid)
        kept, flagged = refine.filter_tracks(tracks,
                                             frame_rate=info["frame_rate"])
        flags = {str(t.track_id): reason for t, reason in flagged}
        result = {"kept": [t.track_id for t in kept], "flagged": flags,
                  "revision": revision}
        if args.drop and flagged:
            with engine.lock(sid):
                record = engine.store.commit(sid, "delete", kept, revision)
            result["revision"] = record.edit_id
        lines = [f"{tid}: {reason}" for tid, reason in sorted(flags.items())]
        verb = "dropped" if args.drop else "flagged"
        head = f"{len(flags)} of {len(tracks)} tracks {verb}"
        return _emit(args, result, "\n".join([head] + lines))

    info = engine.store.sequence_info(sid)
    ops = {
        "interpolate": lambda t: refine.interpolate_keyframes(t),
        "smooth": lambda t: refine.smooth_trajectory(
            t, smoothing_weight=args.weight),
        "reorient": lambda t: refine.reorient_from_motion(
            t, speed_floor=args.speed_floor,
            frame_rate=info["frame_rate"]),
        "average": lambda t: refine.average_static_boxes(t),
    }
    with engine.lock(sid):
        record = apply_track_op(engine, sid, args.track,
                                _head_revision(engine, args), args.op,
                                ops[args.op])
    result = {"revision": record.edit_id, "track_id": args.track,
              "op": args.op}
    return _emit(args, result,
                 f"{args.op} applied to track {args.track}, "
                 f"revision {record.edit_id}")


def cmd_eval(args) -> int:
    engine = _engine(args)
    sid = args.sequence
    gt = engine.store.load_ground_truth(sid)
    if not gt:
        raise StoreError(f"sequence {sid} has no ground truth")
    if args.kind == "f1":
        tracks, _ = engine.store.load_annotations(sid)
        report = f1_report(tracks, gt, iou_threshold=args.iou,
                           metric=args.metric)
        doc = report.to_dict()
        lines = [f"mean F1 {doc['mean_f1']:.4f} "
                 f"(IoU {doc['iou_threshold']:.2f}, {args.metric})"]
        for cls, row in sorted(doc["classes"].items()):
            lines.append(
                f"  {cls}: P {row['precision']:.4f} R {row['recall']:.4f} "
                f"F1 {row['f1']:.4f} (tp {row['tp']} fp {row['fp']} "
                f"fn {row['fn']})")
        return _emit(args, doc, "\n".join(lines))
    dets = engine.store.load_detections(sid)
    if dets is None:
        raise StoreError(f"sequence {sid} has no detections")
    info = engine.store.sequence_info(sid)
    gt_frames = [[] for _ in range(info["frame_count"])]
    for tr in gt:
        for e in tr.entries:
            gt_frames[e.frame].append((tr.class_id, e.box))
    bev = ap_report(dets.frames, gt_frames, metric="bev")
    box3d = ap_report(dets.frames, gt_frames, metric="3d")
    doc = {"classes": {cls: {"ap_bev": bev[cls], "ap_3d": box3d[cls]}
                       for cls in sorted(bev)}}
    lines = []
    for cls, row in sorted(doc["classes"].items()):
        bev_s = "n/a" if row["ap_bev"] is None else f"{row['ap_bev']:.4f}"
        b3_s = "n/a" if row["ap_3d"] is None else f"{row['ap_3d']:.4f}"
        lines.append(f"{cls}: AP(bev) {bev_s} AP(3d) {b3_s}")
    return _emit(args, doc, "\n".join(lines))


def cmd_ground(args) -> int:
    engine = _engine(args)
    sid = args.sequence
    seq = engine.store.load_sequence(sid)
    if not 0 <= args.frame < len(seq.frames):
        raise ValueError(f"frame {args.frame} out of range "
                         f"[0, {len(seq.frames)})")
    model = build_height_grid(seq.frames[args.frame],
                              cell_size=args.cell_size,
                              inlier_threshold=args.threshold,
                              iterations=args.iterations, seed=args.seed)
    out = args.out or f"{engine.store.seq_dir(sid)}/ground.json"
    model.save(out)
    a, b, c, d = model.plane
    supported = int((~np.isnan(model.grid)).sum())
    result = {"plane": [a, b, c, d], "cell_size": model.cell_size,
              "cells": int(model.grid.size), "supported_cells": supported,
              "path": out}
    return _emit(args, result,
                 f"plane {a:+.4f}x {b:+.4f}y {c:+.4f}z {d:+.4f} = 0, "
                 f"{supported}/{model.grid.size} cells supported -> {out}")


def cmd_serve(args) -> int:
    from lidarlabel.server import serve
    if args.json:
        print(json.dumps({"project": args.project, "host": args.host,
                          "port": args.port}))
    serve(args.project, host=args.host, port=args.port)
    return 0


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarlabel",
        description="batch pipeline over annotation projects")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="machine-readable output")

    proj = argparse.ArgumentParser(add_help=False)
    proj.add_argument("--project", required=True, help="project root")
    proj.add_argument("--sequence", required=True, help="sequence id")

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic sequence into a project")
    p.add_argument("--out", required=True, help="project root to write")
    p.add_argument("--sequence", default="synth")
    p.add_argument("--preset", choices=sorted(PRESETS), default="small")
    p.add_argument("--config", help="scene config JSON, overrides preset")
    p.add_argument("--duration", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frame-rate", type=float, dest="frame_rate")
    p.add_argument("--density", type=float)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--ground-density", type=float, dest="ground_density")
    p.add_argument("--no-detections", action="store_true")
    p.add_argument("--dropout", type=float, default=0.05)
    p.add_argument("--box-noise", type=float, default=0.1,
                   dest="box_noise")
    p.add_argument("--fp-rate", type=float, default=0.5, dest="fp_rate")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("autolabel", parents=[common, proj],
                       help="run detection tracking and stage the result")
    p.add_argument("--revision", type=int)
    p.add_argument("--score-floor", type=float, default=0.1,
                   dest="score_floor")
    p.add_argument("--nms-iou", type=float, default=0.25, dest="nms_iou")
    p.set_defaults(fn=cmd_autolabel)

    p = sub.add_parser("propagate", parents=[common, proj],
                       help="propagate a single box forward in time")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--class-id", required=True, choices=CLASSES,
                   dest="class_id")
    p.add_argument("--box", type=float, nargs=7, required=True,
                   metavar=("CX", "CY", "CZ", "L", "W", "H", "YAW"))
    p.add_argument("--n", type=int, default=sot.DEFAULT_HORIZON)
    p.add_argument("--track-id", type=int, dest="track_id")
    p.add_argument("--revision", type=int)
    p.set_defaults(fn=cmd_propagate)

    p = sub.add_parser("refine", parents=[common, proj],
                       help="per-track cleanup passes")
    p.add_argument("op", choices=["interpolate", "smooth", "reorient",
                                  "filter", "average"])
    p.add_argument("--track", type=int,
                   help="track id (all ops except filter)")
    p.add_argument("--weight", type=float,
                   default=refine.DEFAULT_SMOOTHING_WEIGHT)
    p.add_argument("--speed-floor", type=float,
                   default=refine.DEFAULT_SPEED_FLOOR, dest="speed_floor")
    p.add_argument("--drop", action="store_true",
                   help="filter only: delete the flagged tracks")
    p.add_argument("--revision", type=int)
    p.set_defaults(fn=cmd_refine)

    p = sub.add_parser("eval", parents=[common, proj],
                       help="score annotations or detections against gt")
    p.add_argument("kind", choices=["f1", "ap"])
    p.add_argument("--iou", type=float, default=0.3)
    p.add_argument("--metric", choices=["bev", "3d"], default="bev")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ground", parents=[common, proj],
                       help="fit a ground model to one frame")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--cell-size", type=float, default=1.0,
                   dest="cell_size")
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="model path (default: in the sequence dir)")
    p.set_defaults(fn=cmd_ground)

    p = sub.add_parser("serve", parents=[common],
                       help="run the HTTP service over a project")
    p.add_argument("--project", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(fn=cmd_serve)
    return parser


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "refine" and args.op != "filter" \
            and args.track is None:
        print("error: --track is required for this op", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (StoreError, ConflictError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
