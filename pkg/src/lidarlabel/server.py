"""HTTP service over a project store.

Thin JSON front for the engine: every mutating endpoint carries the
client's expected revision, goes through the store's commit/undo path
under a per-sequence lock, and is therefore atomic, conflict-checked,
and undoable. Point payloads are raw little-endian float32.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware

from lidarlabel import refine, sot
from lidarlabel.detect_io import preprocess
from lidarlabel.evalmod import ap_report, f1_report
from lidarlabel.geometry import Box7
from lidarlabel.ground import GroundModel, ground_height_at
from lidarlabel.mot import TrackEntry, Tracklet, run_mot
from lidarlabel.store import (
    ConflictError,
    ProjectStore,
    StoreError,
    load_frame,
    track_from_dict,
    track_to_dict,
)

DEFAULT_PORT = 8077


@dataclass
class ApiSession:
    """What a connected client needs to stay consistent with the store."""

    sequence_id: str
    revision: int
    undo_depth: int

    def to_dict(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "revision": self.revision,
            "undo_depth": self.undo_depth,
        }


class Engine:
    """Store access plus per-sequence serialization and caches.

    The CLI and the HTTP layer both drive the store through this one
    class and the module-level operation functions below, so a batch run
    and a request produce identical edits for identical inputs.
    """

    def __init__(self, store: ProjectStore):
        self.store = store
        self.locks = {}
        self.locks_guard = threading.Lock()
        self.seq_cache = {}
        self.job_counter = 0

    def lock(self, sid: str) -> threading.Lock:
        with self.locks_guard:
            return self.locks.setdefault(sid, threading.Lock())

    def sequence(self, sid: str):
        # frames are immutable once stored, so the cache never staleness-checks
        if sid not in self.seq_cache:
            self.seq_cache[sid] = self.store.load_sequence(sid)
        return self.seq_cache[sid]

    def staged_path(self, sid: str):
        return os.path.join(self.store.seq_dir(sid), "staged.json")

    def read_staged(self, sid: str) -> dict:
        path = self.staged_path(sid)
        if not os.path.exists(path):
            return {"job_id": None, "status": "idle", "pending": [],
                    "flagged": {}}
        with open(path) as fh:
            return json.load(fh)

    def write_staged(self, sid: str, doc: dict):
        with open(self.staged_path(sid), "w") as fh:
            json.dump(doc, fh, indent=1)


def autolabel_sequence(engine: Engine, sid: str, revision,
                       score_floor: float = 0.1,
                       nms_iou: float = 0.25) -> dict:
    """Detections -> tracked, filtered, averaged tracklets in one edit.

    New tracks are appended past the current max id and listed in the
    returned staging doc, flagged ones keyed by id with the reason.
    Caller holds the sequence lock.
    """
    dets = engine.store.load_detections(sid)
    if dets is None:
        raise StoreError(f"sequence {sid} has no detections")
    head = engine.store.revision(sid)
    if revision != head:
        raise ConflictError(f"revision {revision} is stale (head {head})")
    seq = engine.sequence(sid)
    clean = preprocess(dets, score_floor=score_floor, nms_iou=nms_iou)
    tracks = run_mot(seq, clean)
    kept, flagged = refine.filter_tracks(tracks, frame_rate=seq.frame_rate)
    kept = [refine.average_static_boxes(t) for t in kept]
    current, _ = engine.store.load_annotations(sid)
    next_id = max([t.track_id for t in current], default=0) + 1
    staged_ids, flags = [], {}
    merged = list(current)
    for track in kept + [t for t, _ in flagged]:
        renamed = Tracklet(next_id, track.class_id,
                           entries=track.entries, status="confirmed")
        merged.append(renamed)
        staged_ids.append(next_id)
        next_id += 1
    for (track, reason), tid in zip(flagged, staged_ids[len(kept):]):
        flags[str(tid)] = reason
    record = engine.store.commit(sid, "autolabel", merged, revision)
    engine.job_counter += 1
    doc = {
        "job_id": engine.job_counter,
        "status": "done",
        "revision": record.edit_id,
        "pending": staged_ids,
        "flagged": flags,
    }
    engine.write_staged(sid, doc)
    return doc


def propagate_from_box(engine: Engine, sid: str, revision, start_frame: int,
                       class_id: str, box: Box7, horizon=None,
                       track_id=None) -> dict:
    """Seed a keyframe at start_frame and append propagated entries.

    Without track_id a fresh track past the current max id is created;
    with one, entries append to it, which requires the track to end
    before start_frame. Caller holds the sequence lock.
    """
    horizon = sot.DEFAULT_HORIZON if horizon is None else int(horizon)
    if horizon < 1:
        raise ValueError("n must be >= 1")
    seq = engine.sequence(sid)
    params = sot.default_sot_params(class_id, horizon=horizon)
    result = sot.propagate(seq, box, start_frame, class_id, params=params)
    current, _ = engine.store.load_annotations(sid)
    tid = track_id
    if tid is None:
        tid = max([t.track_id for t in current], default=0) + 1
        track = Tracklet(tid, class_id, entries=[], status="confirmed")
        others = list(current)
    else:
        match = [t for t in current if t.track_id == tid]
        if not match:
            raise StoreError(f"unknown track {tid}")
        old = match[0]
        if old.last_frame >= start_frame:
            raise ValueError(f"track {tid} already annotated at or past "
                             f"frame {start_frame}")
        track = Tracklet(tid, old.class_id, entries=list(old.entries),
                         status="confirmed")
        others = [t for t in current if t.track_id != tid]
    track.append(TrackEntry(start_frame, box, source="manual",
                            keyframe=True))
    for entry in result.entries:
        track.append(entry)
    frames = [start_frame] + [e.frame for e in result.entries]
    record = engine.store.commit(sid, "propagate", others + [track],
                                 revision, frames=frames)
    return {
        "revision": record.edit_id,
        "track_id": tid,
        "n_entries": len(result.entries),
        "notice": result.notice,
    }


def apply_track_op(engine: Engine, sid: str, tid: int, revision, op: str,
                   fn):
    """Replace track tid with fn(track) as one conflict-checked edit.

    Staleness is checked before fn runs so a conflicted caller is told
    so even when the op itself would also have been rejected. Caller
    holds the sequence lock.
    """
    current, head = engine.store.load_annotations(sid)
    if revision != head:
        raise ConflictError(f"revision {revision} is stale (head {head})")
    match = [t for t in current if t.track_id == tid]
    if not match:
        raise StoreError(f"unknown track {tid}")
    new_track = fn(match[0])
    merged = [new_track if t.track_id == tid else t for t in current]
    return engine.store.commit(sid, op, merged, revision)


def _http(exc: Exception) -> HTTPException:
    if isinstance(exc, ConflictError):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, StoreError):
        msg = str(exc)
        if "unknown sequence" in msg or "unknown track" in msg:
            return HTTPException(status_code=404, detail=msg)
        return HTTPException(status_code=400, detail=msg)
    return HTTPException(status_code=400, detail=str(exc))


def _need(body: dict, key: str):
    if key not in body:
        raise HTTPException(status_code=400, detail=f"missing field {key!r}")
    return body[key]


def _box_from(values) -> Box7:
    if not isinstance(values, (list, tuple)) or len(values) != 7:
        raise HTTPException(status_code=400,
                            detail="box must be a list of 7 numbers")
    try:
        return Box7(*[float(v) for v in values])
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def create_app(store: ProjectStore) -> FastAPI:
    app = FastAPI(title="lidarlabel")
    # the browser UI is served from its own origin during development
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    engine = Engine(store)
    app.state.engine = engine

    def annotations(sid: str):
        try:
            return engine.store.load_annotations(sid)
        except (StoreError, OSError, ValueError) as exc:
            raise _http(exc) from exc

    def commit(sid: str, op: str, tracks, revision, frames=None):
        try:
            record = engine.store.commit(sid, op, tracks, revision,
                                         frames=frames)
        except (ConflictError, StoreError, ValueError) as exc:
            raise _http(exc) from exc
        return record

    def parse_tracks(raw, classes):
        tracks = []
        try:
            for td in raw:
                if td["class"] not in classes:
                    raise ValueError(f"unknown class {td['class']!r}")
                tracks.append(track_from_dict(td))
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        ids = [t.track_id for t in tracks]
        if len(set(ids)) != len(ids):
            raise HTTPException(status_code=400,
                                detail="duplicate track ids")
        return tracks

    # reads ------------------------------------------------------------
    @app.get("/sequences")
    def list_sequences():
        manifest = engine.store.load_manifest(check_files=False)
        out = []
        for sid, info in sorted(manifest["sequences"].items()):
            out.append({
                "id": sid,
                "frame_count": info["frame_count"],
                "frame_rate": info["frame_rate"],
                "bounds": info.get("bounds"),
                "revision": engine.store.revision(sid),
                "has_detections": bool(info.get("detections")),
                "has_ground_truth": bool(info.get("ground_truth")),
            })
        return out

    @app.get("/sequences/{sid}/session")
    def session(sid: str):
        try:
            revision = engine.store.revision(sid)
            engine.store.sequence_info(sid)
        except StoreError as exc:
            raise _http(exc) from exc
        return ApiSession(sid, revision,
                          engine.store.undo_depth(sid)).to_dict()

    @app.get("/sequences/{sid}/frames/{t}/points")
    def frame_points(sid: str, t: int, decimate: int = 1):
        if decimate < 1:
            raise HTTPException(status_code=400,
                                detail="decimate must be >= 1")
        try:
            info = engine.store.sequence_info(sid)
        except StoreError as exc:
            raise _http(exc) from exc
        if not 0 <= t < info["frame_count"]:
            raise HTTPException(status_code=404,
                                detail=f"frame {t} out of range")
        try:
            pts = load_frame(os.path.join(engine.store.root,
                                          info["frames"][t]))
        except (StoreError, OSError) as exc:
            raise _http(exc) from exc
        payload = np.ascontiguousarray(pts[::decimate], dtype="<f4").tobytes()
        return Response(content=payload,
                        media_type="application/octet-stream")

    @app.get("/sequences/{sid}/annotations")
    def get_annotations(sid: str):
        tracks, revision = annotations(sid)
        return {"revision": revision,
                "tracks": [track_to_dict(t) for t in tracks]}

    def ground_model(sid: str) -> GroundModel:
        try:
            engine.store.sequence_info(sid)
        except StoreError as exc:
            raise _http(exc) from exc
        path = os.path.join(engine.store.seq_dir(sid), "ground.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=404,
                                detail=f"sequence {sid} has no ground model")
        return GroundModel.load(path)

    @app.get("/sequences/{sid}/ground")
    def get_ground(sid: str):
        return ground_model(sid).to_dict()

    @app.get("/sequences/{sid}/ground/height")
    def get_ground_height(sid: str, x: float, y: float):
        model = ground_model(sid)
        try:
            z = ground_height_at(model, x, y)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"x": x, "y": y, "z": z}

    # whole-set write ---------------------------------------------------
    @app.put("/sequences/{sid}/annotations")
    def put_annotations(sid: str, body: dict = Body(...)):
        revision = _need(body, "revision")
        manifest = engine.store.load_manifest(check_files=False)
        tracks = parse_tracks(_need(body, "tracks"), manifest["classes"])
        with engine.lock(sid):
            record = commit(sid, "replace", tracks, revision)
        return {"revision": record.edit_id}

    # engine actions -----------------------------------------------------
    @app.post("/sequences/{sid}/autolabel")
    def autolabel(sid: str, body: dict = Body(default={})):
        revision = _need(body, "revision")
        lock = engine.lock(sid)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail=f"job already running on {sid}")
        try:
            return autolabel_sequence(
                engine, sid, revision,
                score_floor=body.get("score_floor", 0.1),
                nms_iou=body.get("nms_iou", 0.25))
        except (ConflictError, StoreError, ValueError, OSError) as exc:
            raise _http(exc) from exc
        finally:
            lock.release()

    @app.get("/sequences/{sid}/jobs/{job_id}")
    def job_status(sid: str, job_id: int):
        staged = engine.read_staged(sid)
        if staged.get("job_id") != job_id:
            raise HTTPException(status_code=404,
                                detail=f"unknown job {job_id}")
        return staged

    @app.get("/sequences/{sid}/staged")
    def staged(sid: str):
        try:
            engine.store.sequence_info(sid)
        except StoreError as exc:
            raise _http(exc) from exc
        return engine.read_staged(sid)

    @app.post("/sequences/{sid}/staged/accept")
    def staged_accept(sid: str, body: dict = Body(default={})):
        doc = engine.read_staged(sid)
        chosen = body.get("track_ids")
        accept = set(doc["pending"]) if chosen is None else set(chosen)
        doc["pending"] = [t for t in doc["pending"] if t not in accept]
        for tid in accept:
            doc["flagged"].pop(str(tid), None)
        engine.write_staged(sid, doc)
        return doc

    @app.post("/sequences/{sid}/staged/reject")
    def staged_reject(sid: str, body: dict = Body(...)):
        revision = _need(body, "revision")
        chosen = set(_need(body, "track_ids"))
        with engine.lock(sid):
            current, _ = annotations(sid)
            remaining = [t for t in current if t.track_id not in chosen]
            if len(remaining) == len(current):
                raise HTTPException(status_code=400,
                                    detail="no matching staged tracks")
            record = commit(sid, "reject", remaining, revision)
            doc = engine.read_staged(sid)
            doc["pending"] = [t for t in doc["pending"] if t not in chosen]
            for tid in chosen:
                doc["flagged"].pop(str(tid), None)
            doc["revision"] = record.edit_id
            engine.write_staged(sid, doc)
        return doc

    @app.post("/sequences/{sid}/propagate")
    def propagate(sid: str, body: dict = Body(...)):
        revision = _need(body, "revision")
        start_frame = int(_need(body, "start_frame"))
        class_id = _need(body, "class_id")
        box = _box_from(_need(body, "box"))
        with engine.lock(sid):
            try:
                return propagate_from_box(
                    engine, sid, revision, start_frame, class_id, box,
                    horizon=body.get("n"), track_id=body.get("track_id"))
            except (ConflictError, StoreError, ValueError, OSError) as exc:
                raise _http(exc) from exc

    # per-track refinement ------------------------------------------------
    def _track_op(sid, tid, revision, op, fn):
        with engine.lock(sid):
            try:
                record = apply_track_op(engine, sid, tid, revision, op, fn)
            except (ConflictError, StoreError, ValueError, OSError) as exc:
                raise _http(exc) from exc
        return {"revision": record.edit_id, "track_id": tid}

    @app.post("/sequences/{sid}/tracks/{tid}/interpolate")
    def track_interpolate(sid: str, tid: int, body: dict = Body(...)):
        return _track_op(sid, tid, _need(body, "revision"), "interpolate",
                         refine.interpolate_keyframes)

    @app.post("/sequences/{sid}/tracks/{tid}/smooth")
    def track_smooth(sid: str, tid: int, body: dict = Body(...)):
        weight = float(body.get("weight", refine.DEFAULT_SMOOTHING_WEIGHT))
        return _track_op(sid, tid, _need(body, "revision"), "smooth",
                         lambda t: refine.smooth_trajectory(
                             t, smoothing_weight=weight))

    @app.post("/sequences/{sid}/tracks/{tid}/reorient")
    def track_reorient(sid: str, tid: int, body: dict = Body(...)):
        floor = float(body.get("speed_floor", refine.DEFAULT_SPEED_FLOOR))
        seq_rate = engine.store.sequence_info(sid)["frame_rate"]
        return _track_op(sid, tid, _need(body, "revision"), "reorient",
                         lambda t: refine.reorient_from_motion(
                             t, speed_floor=floor, frame_rate=seq_rate))

    @app.post("/sequences/{sid}/tracks/{tid}/flip")
    def track_flip(sid: str, tid: int, body: dict = Body(...)):
        frames = _need(body, "frames")
        return _track_op(sid, tid, _need(body, "revision"), "flip",
                         lambda t: refine.flip_orientation(t, frames))

    @app.post("/sequences/{sid}/tracks/{tid}/idfix")
    def track_idfix(sid: str, tid: int, body: dict = Body(...)):
        revision = _need(body, "revision")
        from_frame = int(_need(body, "from_frame"))
        new_id = int(_need(body, "new_id"))
        with engine.lock(sid):
            current, _ = annotations(sid)
            if not any(t.track_id == tid for t in current):
                raise HTTPException(status_code=404,
                                    detail=f"unknown track {tid}")
            try:
                fixed = refine.fix_id_switch(current, tid, from_frame, new_id)
            except ValueError as exc:
                raise HTTPException(status_code=400,
                                    detail=str(exc)) from exc
            record = commit(sid, "id_fix", fixed, revision)
        return {"revision": record.edit_id, "track_id": tid,
                "new_id": new_id}

    @app.post("/sequences/{sid}/undo")
    def undo(sid: str, body: dict = Body(...)):
        revision = _need(body, "revision")
        with engine.lock(sid):
            try:
                record = engine.store.undo(sid, revision)
            except (ConflictError, StoreError) as exc:
                raise _http(exc) from exc
        return {"revision": record.edit_id, "undid": record.undoes}

    # evaluation ---------------------------------------------------------
    @app.post("/eval")
    def evaluate(body: dict = Body(...)):
        sid = _need(body, "sequence_id")
        kind = body.get("kind", "f1")
        metric = body.get("metric", "bev")
        try:
            gt = engine.store.load_ground_truth(sid)
        except StoreError as exc:
            raise _http(exc) from exc
        if not gt:
            raise HTTPException(status_code=400,
                                detail=f"sequence {sid} has no ground truth")
        if kind == "f1":
            iou = float(body.get("iou_threshold", 0.3))
            tracks, _ = annotations(sid)
            try:
                report = f1_report(tracks, gt, iou_threshold=iou,
                                   metric=metric)
            except ValueError as exc:
                raise HTTPException(status_code=400,
                                    detail=str(exc)) from exc
            return report.to_dict()
        if kind == "ap":
            dets = engine.store.load_detections(sid)
            if dets is None:
                raise HTTPException(status_code=400,
                                    detail=f"sequence {sid} has no detections")
            n = engine.store.sequence_info(sid)["frame_count"]
            gt_frames = [[] for _ in range(n)]
            for tr in gt:
                for e in tr.entries:
                    gt_frames[e.frame].append((tr.class_id, e.box))
            bev = ap_report(dets.frames, gt_frames, metric="bev")
            box3d = ap_report(dets.frames, gt_frames, metric="3d")
            return {"classes": {cls: {"ap_bev": bev[cls],
                                      "ap_3d": box3d[cls]}
                                for cls in sorted(bev)}}
        raise HTTPException(status_code=400,
                            detail=f"unknown eval kind {kind!r}")

    return app


def serve(root, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
    """Run the service over the project at root until interrupted."""
    import uvicorn

    store = ProjectStore(root)
    store.load_manifest()  # fail fast on a broken project
    app = create_app(store)
    uvicorn.run(app, host=host, port=port, log_level="warning")
