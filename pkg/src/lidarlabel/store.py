"""Project persistence: frames, annotations, manifests, and an edit log.

Layout under a project root:

    manifest.json
    sequences/<id>/frames/000000.bin     flat little-endian float32 x,y,z,i
    sequences/<id>/annotations.json      current annotation state
    sequences/<id>/annotations.base.json state at sequence creation
    sequences/<id>/edits.jsonl           append-only edit log
    sequences/<id>/detections.csv        optional detector output
    sequences/<id>/gt.json               optional synthetic ground truth
    sequences/<id>/ground.json           optional ground model

Every mutation after creation goes through ``commit`` which records a
forward payload and its exact inverse, so undo restores the prior state
bit for bit and replaying the log from the base file reproduces the
current file.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from lidarlabel.geometry import CLASSES, Box7, PointCloud
from lidarlabel.mot import TrackEntry, Tracklet
from lidarlabel.synth import DEFAULT_BOUNDS, SceneSequence

MANIFEST_VERSION = 1
ANNOTATION_VERSION = 1

EDIT_OPS = (
    "create", "move", "resize", "rotate", "delete", "id_fix", "flip",
    "propagate", "autolabel", "interpolate", "smooth", "reorient",
    "average", "replace", "accept", "reject", "undo",
)

_FLOAT32_RECORD = 16  # 4 little-endian float32 per point


class StoreError(Exception):
    pass


class ConflictError(StoreError):
    """A write based on an outdated revision."""


def save_frame(path, points: np.ndarray):
    pts = np.ascontiguousarray(points, dtype="<f4")
    if pts.ndim != 2 or pts.shape[1] != 4:
        raise StoreError(f"frame must be (N, 4), got {pts.shape}")
    _atomic_write_bytes(path, pts.tobytes())


def load_frame(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % _FLOAT32_RECORD:
        raise StoreError(f"truncated frame file {path}: {len(raw)} bytes")
    return np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(float)


def save_frame_ascii(path, points: np.ndarray):
    """Debug variant: one 'x y z intensity' line per point."""
    np.savetxt(path, np.asarray(points, dtype=float), fmt="%.6f")


def track_to_dict(track: Tracklet) -> dict:
    return {
        "id": track.track_id,
        "class": track.class_id,
        "entries": [
            {
                "frame": e.frame,
                "box": [e.box.cx, e.box.cy, e.box.cz, e.box.length,
                        e.box.width, e.box.height, e.box.yaw],
                "source": e.source,
                "keyframe": e.keyframe,
            }
            for e in track.entries
        ],
    }


def track_from_dict(data: dict) -> Tracklet:
    entries = [
        TrackEntry(e["frame"], Box7(*e["box"]), source=e["source"],
                   keyframe=e["keyframe"])
        for e in data["entries"]
    ]
    return Tracklet(data["id"], data["class"], entries=entries,
                    status="confirmed")


def _atomic_write_bytes(path, payload: bytes):
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _atomic_write_json(path, obj):
    _atomic_write_bytes(path, json.dumps(obj, indent=1).encode())


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


@dataclass
class EditRecord:
    """One logged mutation with enough state to replay or invert it.

    forward and inverse both have the shape {"set": [track dicts],
    "deleted": [track ids]}; applying forward to the pre-state or inverse
    to the post-state is exact.
    """

    edit_id: int
    op: str
    track_ids: list
    frames: list
    forward: dict
    inverse: dict
    timestamp: float = field(default_factory=time.time)
    undoes: int = None

    def __post_init__(self):
        if self.op not in EDIT_OPS:
            raise ValueError(f"unknown edit op {self.op!r}")
        if self.edit_id < 1:
            raise ValueError("edit ids start at 1")

    def to_dict(self) -> dict:
        out = {
            "edit_id": self.edit_id,
            "op": self.op,
            "track_ids": self.track_ids,
            "frames": self.frames,
            "forward": self.forward,
            "inverse": self.inverse,
            "timestamp": self.timestamp,
        }
        if self.undoes is not None:
            out["undoes"] = self.undoes
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EditRecord":
        return cls(
            edit_id=data["edit_id"], op=data["op"],
            track_ids=data["track_ids"], frames=data["frames"],
            forward=data["forward"], inverse=data["inverse"],
            timestamp=data["timestamp"], undoes=data.get("undoes"),
        )


def apply_payload(tracks_by_id: dict, payload: dict) -> dict:
    """Apply a forward or inverse payload to an id -> track-dict map."""
    out = dict(tracks_by_id)
    for td in payload.get("set", []):
        out[td["id"]] = td
    for tid in payload.get("deleted", []):
        out.pop(tid, None)
    return out


def diff_states(before: dict, after: dict):
    """(forward, inverse) payloads between two id -> track-dict maps."""
    forward = {"set": [], "deleted": []}
    inverse = {"set": [], "deleted": []}
    for tid, td in after.items():
        if tid not in before:
            forward["set"].append(td)
            inverse["deleted"].append(tid)
        elif before[tid] != td:
            forward["set"].append(td)
            inverse["set"].append(before[tid])
    for tid, td in before.items():
        if tid not in after:
            forward["deleted"].append(tid)
            inverse["set"].append(td)
    return forward, inverse


class ProjectStore:
    """Files plus revision bookkeeping for one project root."""

    def __init__(self, root):
        self.root = str(root)

    # paths -----------------------------------------------------------
    def manifest_path(self):
        return os.path.join(self.root, "manifest.json")

    def seq_dir(self, sequence_id):
        return os.path.join(self.root, "sequences", str(sequence_id))

    def _seq_file(self, sequence_id, name):
        return os.path.join(self.seq_dir(sequence_id), name)

    # manifest ----------------------------------------------------------
    def create_project(self, classes=None):
        os.makedirs(self.root, exist_ok=True)
        manifest = {
            "version": MANIFEST_VERSION,
            "classes": list(classes or CLASSES),
            "sequences": {},
        }
        _atomic_write_json(self.manifest_path(), manifest)
        return manifest

    def load_manifest(self, check_files: bool = True) -> dict:
        path = self.manifest_path()
        if not os.path.exists(path):
            raise StoreError(f"no manifest at {path}")
        manifest = _load_json(path)
        if manifest.get("version") != MANIFEST_VERSION:
            raise StoreError(
                f"unrecognized manifest version {manifest.get('version')!r}")
        if check_files:
            for sid, info in manifest["sequences"].items():
                for rel in info["frames"]:
                    p = os.path.join(self.root, rel)
                    if not os.path.exists(p):
                        raise StoreError(
                            f"sequence {sid}: missing frame file {rel}")
                for key in ("annotations", "detections", "ground_truth",
                            "ground_model"):
                    rel = info.get(key)
                    if rel and not os.path.exists(
                            os.path.join(self.root, rel)):
                        raise StoreError(
                            f"sequence {sid}: missing {key} file {rel}")
        return manifest

    def sequence_info(self, sequence_id) -> dict:
        manifest = self.load_manifest(check_files=False)
        info = manifest["sequences"].get(str(sequence_id))
        if info is None:
            raise StoreError(f"unknown sequence {sequence_id!r}")
        return info

    # sequence creation -------------------------------------------------
    def add_sequence(self, sequence_id, seq: SceneSequence, detections=None,
                     initial_tracks=None):
        """Write a sequence's frames and seed files, update the manifest."""
        sid = str(sequence_id)
        if not len(seq.frames):
            raise StoreError("cannot store a sequence of 0 frames")
        manifest = self.load_manifest(check_files=False)
        if sid in manifest["sequences"]:
            raise StoreError(f"sequence {sid} already exists")
        frames_dir = self._seq_file(sid, "frames")
        os.makedirs(frames_dir, exist_ok=True)
        rels = []
        for i, frame in enumerate(seq.frames):
            rel = os.path.join("sequences", sid, "frames", f"{i:06d}.bin")
            save_frame(os.path.join(self.root, rel), frame.points)
            rels.append(rel)

        info = {
            "frame_count": len(seq.frames),
            "frame_rate": seq.frame_rate,
            "frames": rels,
            "annotations": os.path.join("sequences", sid, "annotations.json"),
            "bounds": list(seq.bounds),
            "ground_plane": list(seq.ground_plane),
        }
        base = [track_to_dict(t) for t in (initial_tracks or [])]
        doc = {"version": ANNOTATION_VERSION, "tracks": base}
        _atomic_write_json(self._seq_file(sid, "annotations.json"), doc)
        _atomic_write_json(self._seq_file(sid, "annotations.base.json"), doc)
        open(self._seq_file(sid, "edits.jsonl"), "w").close()

        if seq.gt_tracks:
            gt_doc = {"version": ANNOTATION_VERSION,
                      "tracks": [track_to_dict(t) for t in seq.gt_tracks]}
            _atomic_write_json(self._seq_file(sid, "gt.json"), gt_doc)
            info["ground_truth"] = os.path.join("sequences", sid, "gt.json")
        if detections is not None:
            from lidarlabel.detect_io import save_detections
            rel = os.path.join("sequences", sid, "detections.csv")
            save_detections(detections, os.path.join(self.root, rel))
            info["detections"] = rel

        manifest["sequences"][sid] = info
        _atomic_write_json(self.manifest_path(), manifest)
        return info

    # loading -------------------------------------------------------------
    def load_sequence(self, sequence_id) -> SceneSequence:
        sid = str(sequence_id)
        info = self.sequence_info(sid)
        if info["frame_count"] < 1 or not info["frames"]:
            raise StoreError(f"sequence {sid}: invalid manifest, 0 frames")
        if info["frame_count"] != len(info["frames"]):
            raise StoreError(
                f"sequence {sid}: manifest frame_count disagrees with paths")
        frames = []
        rate = info["frame_rate"]
        for i, rel in enumerate(info["frames"]):
            path = os.path.join(self.root, rel)
            try:
                pts = load_frame(path)
            except (OSError, StoreError) as exc:
                raise StoreError(f"sequence {sid} frame {i}: {exc}") from exc
            frames.append(PointCloud(pts, timestamp=i / rate, frame_index=i))
        gt = []
        if info.get("ground_truth"):
            doc = _load_json(os.path.join(self.root, info["ground_truth"]))
            gt = [track_from_dict(td) for td in doc["tracks"]]
        return SceneSequence(
            frames=frames, gt_tracks=gt,
            ground_plane=tuple(info.get("ground_plane", (0.0, 0.0, 1.0, 0.0))),
            bounds=tuple(info.get("bounds", DEFAULT_BOUNDS)),
            frame_rate=rate,
        )

    def load_annotations(self, sequence_id):
        """(tracks, revision) for a sequence."""
        info = self.sequence_info(sequence_id)
        doc = _load_json(os.path.join(self.root, info["annotations"]))
        if doc.get("version") != ANNOTATION_VERSION:
            raise StoreError(
                f"unrecognized annotation version {doc.get('version')!r}")
        tracks = [track_from_dict(td) for td in doc["tracks"]]
        return tracks, self.revision(sequence_id)

    def load_ground_truth(self, sequence_id):
        info = self.sequence_info(sequence_id)
        if not info.get("ground_truth"):
            return []
        doc = _load_json(os.path.join(self.root, info["ground_truth"]))
        return [track_from_dict(td) for td in doc["tracks"]]

    def load_detections(self, sequence_id):
        from lidarlabel.detect_io import load_detections
        info = self.sequence_info(sequence_id)
        rel = info.get("detections")
        if not rel:
            return None
        return load_detections(os.path.join(self.root, rel),
                               n_frames=info["frame_count"])

    # annotation writes ---------------------------------------------------
    def save_annotations(self, sequence_id, tracks, expected_revision=None):
        """Replace the annotation set.

        With expected_revision this is a logged, undoable, conflict-checked
        edit; without it the file is rewritten directly (initial import).
        """
        if expected_revision is not None:
            return self.commit(sequence_id, "replace", tracks,
                               expected_revision)
        info = self.sequence_info(sequence_id)
        doc = {"version": ANNOTATION_VERSION,
               "tracks": [track_to_dict(t) for t in tracks]}
        _atomic_write_json(os.path.join(self.root, info["annotations"]), doc)

    def _log_path(self, sequence_id):
        return self._seq_file(str(sequence_id), "edits.jsonl")

    def read_log(self, sequence_id):
        path = self._log_path(sequence_id)
        if not os.path.exists(path):
            return []
        with open(path) as fh:
            return [EditRecord.from_dict(json.loads(line))
                    for line in fh if line.strip()]

    def revision(self, sequence_id) -> int:
        log = self.read_log(sequence_id)
        return log[-1].edit_id if log else 0

    def _append_record(self, sequence_id, record: EditRecord):
        with open(self._log_path(sequence_id), "a") as fh:
            fh.write(json.dumps(record.to_dict()) + "\n")

    def commit(self, sequence_id, op, new_tracks, expected_revision,
               frames=None) -> EditRecord:
        """Replace annotation state as one logged, invertible edit."""
        log = self.read_log(sequence_id)
        current_rev = log[-1].edit_id if log else 0
        if expected_revision != current_rev:
            raise ConflictError(
                f"sequence {sequence_id}: edit based on revision "
                f"{expected_revision}, store is at {current_rev}")
        tracks_now, _ = self.load_annotations(sequence_id)
        before = {t.track_id: track_to_dict(t) for t in tracks_now}
        after = {t.track_id: track_to_dict(t) for t in new_tracks}
        forward, inverse = diff_states(before, after)
        affected = sorted(
            {td["id"] for td in forward["set"]}
            | set(forward["deleted"])
            | {td["id"] for td in inverse["set"]}
        )
        record = EditRecord(
            edit_id=current_rev + 1, op=op, track_ids=affected,
            frames=sorted(frames) if frames else [],
            forward=forward, inverse=inverse,
        )
        self._write_state(sequence_id, after)
        self._append_record(sequence_id, record)
        return record

    def _write_state(self, sequence_id, tracks_by_id: dict):
        info = self.sequence_info(sequence_id)
        doc = {
            "version": ANNOTATION_VERSION,
            "tracks": [tracks_by_id[k] for k in sorted(tracks_by_id)],
        }
        _atomic_write_json(os.path.join(self.root, info["annotations"]), doc)

    def undoable_record(self, sequence_id):
        """The record an undo would invert, or None.

        Undos are themselves logged edits, so the walk skips each undo
        record together with the edit it cancelled.
        """
        log = self.read_log(sequence_id)
        skip = 0
        for record in reversed(log):
            if record.op == "undo":
                skip += 1
            elif skip:
                skip -= 1
            else:
                return record
        return None

    def undo_depth(self, sequence_id) -> int:
        """How many times undo can currently be applied in a row."""
        log = self.read_log(sequence_id)
        depth = 0
        skip = 0
        for record in reversed(log):
            if record.op == "undo":
                skip += 1
            elif skip:
                skip -= 1
            else:
                depth += 1
        return depth

    def undo(self, sequence_id, expected_revision) -> EditRecord:
        log = self.read_log(sequence_id)
        current_rev = log[-1].edit_id if log else 0
        if expected_revision != current_rev:
            raise ConflictError(
                f"sequence {sequence_id}: undo based on revision "
                f"{expected_revision}, store is at {current_rev}")
        target = self.undoable_record(sequence_id)
        if target is None:
            raise StoreError(f"sequence {sequence_id}: nothing to undo")
        tracks_now, _ = self.load_annotations(sequence_id)
        before = {t.track_id: track_to_dict(t) for t in tracks_now}
        after = apply_payload(before, target.inverse)
        record = EditRecord(
            edit_id=current_rev + 1, op="undo", track_ids=target.track_ids,
            frames=target.frames, forward=target.inverse,
            inverse=target.forward, undoes=target.edit_id,
        )
        self._write_state(sequence_id, after)
        self._append_record(sequence_id, record)
        return record

    def replay(self, sequence_id):
        """Annotation state rebuilt from the base file plus the edit log."""
        sid = str(sequence_id)
        doc = _load_json(self._seq_file(sid, "annotations.base.json"))
        state = {td["id"]: td for td in doc["tracks"]}
        for record in self.read_log(sid):
            state = apply_payload(state, record.forward)
        return [track_from_dict(state[k]) for k in sorted(state)]
