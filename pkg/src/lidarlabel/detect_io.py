"""Detection file ingest and tracker-input preprocessing.

Detections arrive as JSON (array of records) or a CSV mirror, one record
per box:

    {"frame": int, "class": str, "score": float,
     "box": [cx, cy, cz, length, width, height, yaw]}

Preprocessing applies a score floor and a stricter class-aware NMS so the
tracker sees clean input.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from lidarlabel.geometry import CLASSES, Box7, Detection, nms

DEFAULT_SCORE_FLOOR = 0.1
DEFAULT_NMS_IOU = 0.25

CSV_COLUMNS = ["frame", "class", "score", "cx", "cy", "cz", "length", "width", "height", "yaw"]


@dataclass
class DetectionFrameSet:
    """Per-frame detection lists aligned to a sequence's frame indices."""

    frames: list
    source: str = "file"

    def __post_init__(self):
        if self.source not in ("file", "synthetic"):
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, idx):
        return self.frames[idx]

    def total(self) -> int:
        return sum(len(f) for f in self.frames)


def _validate_record(frame, class_id, score, box_values, where):
    if not isinstance(frame, int) or frame < 0:
        raise ValueError(f"{where}: invalid frame {frame!r}")
    if class_id not in CLASSES:
        raise ValueError(f"{where}: unknown class {class_id!r}")
    try:
        score = float(score)
    except (TypeError, ValueError):
        raise ValueError(f"{where}: invalid score {score!r}") from None
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"{where}: score {score} out of [0, 1]")
    if len(box_values) != 7:
        raise ValueError(f"{where}: box needs 7 values, got {len(box_values)}")
    try:
        box = Box7.from_array(box_values)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: invalid box: {exc}") from None
    return frame, Detection(box, class_id, score)


def _records_from_json(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("detection JSON must be an array of records")
    for i, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ValueError(f"record {i}: not an object")
        missing = {"frame", "class", "score", "box"} - rec.keys()
        if missing:
            raise ValueError(f"record {i}: missing fields {sorted(missing)}")
        where = f"record {i} (frame {rec['frame']!r})"
        yield _validate_record(rec["frame"], rec["class"], rec["score"], rec["box"], where)


def _records_from_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        if list(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"csv header must be {','.join(CSV_COLUMNS)}")
        for i, row in enumerate(reader):
            where = f"row {i + 2} (frame {row['frame']!r})"
            try:
                frame = int(row["frame"])
            except (TypeError, ValueError):
                raise ValueError(f"{where}: invalid frame") from None
            box_values = []
            for col in CSV_COLUMNS[3:]:
                try:
                    box_values.append(float(row[col]))
                except (TypeError, ValueError):
                    raise ValueError(f"{where}: invalid {col} {row[col]!r}") from None
            yield _validate_record(frame, row["class"], row["score"], box_values, where)


def load_detections(path, fmt: str = None, n_frames: int = None) -> DetectionFrameSet:
    """Load and validate a detection file.

    fmt is inferred from the extension when omitted. n_frames pads the
    result with empty frames up to the sequence length; records beyond a
    declared n_frames are an error.
    """
    path = str(path)
    if fmt is None:
        fmt = "csv" if path.endswith(".csv") else "json"
    if fmt == "json":
        records = _records_from_json(path)
    elif fmt == "csv":
        records = _records_from_csv(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    by_frame = {}
    max_frame = -1
    for frame, det in records:
        if n_frames is not None and frame >= n_frames:
            raise ValueError(f"frame {frame} beyond declared length {n_frames}")
        by_frame.setdefault(frame, []).append(det)
        max_frame = max(max_frame, frame)
    count = n_frames if n_frames is not None else max_frame + 1
    frames = [by_frame.get(t, []) for t in range(count)]
    return DetectionFrameSet(frames=frames, source="file")


def save_detections(dets: DetectionFrameSet, path, fmt: str = None):
    """Write a detection set as JSON or the CSV mirror."""
    path = str(path)
    if fmt is None:
        fmt = "csv" if path.endswith(".csv") else "json"
    if fmt == "json":
        records = [
            {
                "frame": t,
                "class": d.class_id,
                "score": d.score,
                "box": [float(v) for v in d.box.to_array()],
            }
            for t, frame in enumerate(dets.frames)
            for d in frame
        ]
        with open(path, "w") as fh:
            json.dump(records, fh)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for t, frame in enumerate(dets.frames):
                for d in frame:
                    writer.writerow([t, d.class_id, d.score] + [float(v) for v in d.box.to_array()])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def preprocess(
    dets: DetectionFrameSet,
    score_floor: float = DEFAULT_SCORE_FLOOR,
    nms_iou: float = DEFAULT_NMS_IOU,
    metric: str = "bev",
) -> DetectionFrameSet:
    """Score-floor then stricter class-aware NMS, per frame."""
    if not 0.0 < score_floor < 1.0:
        raise ValueError("score_floor must be in (0, 1)")
    if not 0.0 < nms_iou < 1.0:
        raise ValueError("nms_iou must be in (0, 1)")
    out = []
    for frame in dets.frames:
        survivors = [d for d in frame if d.score >= score_floor]
        out.append(nms(survivors, nms_iou, metric=metric))
    return DetectionFrameSet(frames=out, source=dets.source)
