"""Trajectory post-processing and batch-edit support.

Keyframe interpolation, cubic smoothing-spline trajectory smoothing,
motion-derived orientation, static-box averaging, heuristic track filters,
and the two error-correction edits annotators reach for most: ID fixes and
orientation flips. Every operation is a pure transformation returning a
new tracklet (or track list); inputs are never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_smoothing_spline

from lidarlabel.geometry import Box7, normalize_yaw
from lidarlabel.mot import DEFAULT_FRAME_RATE, TrackEntry, Tracklet
from lidarlabel.sot import SEARCH_RADIUS_BY_CLASS

DEFAULT_MIN_TRACK_LENGTH = 5
DEFAULT_STATIC_DISPLACEMENT = 0.5
DEFAULT_SPEED_FLOOR = 0.3
DEFAULT_SMOOTHING_WEIGHT = 0.5
# a smoothed trajectory may not pull its endpoints further than this from
# the annotated positions: ends have one-sided support and drift worst
ENDPOINT_SHIFT_LIMIT = 0.2

MAX_SPEED_BY_CLASS = {
    "vehicle": 25.0,
    "pedestrian": 2.0,
    "cyclist": 10.0,
    "motorcycle": 30.0,
    "bus": 20.0,
    "truck": 25.0,
}


@dataclass
class ClassParams:
    class_id: str
    max_speed: float
    min_track_length: int = DEFAULT_MIN_TRACK_LENGTH
    static_displacement: float = DEFAULT_STATIC_DISPLACEMENT
    search_radius: float = 2.0

    def __post_init__(self):
        if self.max_speed <= 0:
            raise ValueError("max_speed must be > 0")
        if self.min_track_length < 1:
            raise ValueError("min_track_length must be >= 1")


def default_class_params(class_id: str) -> ClassParams:
    return ClassParams(
        class_id=class_id,
        max_speed=MAX_SPEED_BY_CLASS.get(class_id, 25.0),
        search_radius=SEARCH_RADIUS_BY_CLASS.get(class_id, 2.0),
    )


def _clone(track: Tracklet, entries) -> Tracklet:
    return Tracklet(track.track_id, track.class_id, entries=entries,
                    status=track.status)


def _with_box(entry: TrackEntry, box: Box7, source=None) -> TrackEntry:
    return TrackEntry(entry.frame, box, source=source or entry.source,
                      keyframe=entry.keyframe)


def interpolate_keyframes(track: Tracklet) -> Tracklet:
    """Rebuild every non-keyframe entry between consecutive keyframes.

    Center and size interpolate linearly, yaw along the shortest arc.
    Keyframes and entries outside the first/last keyframe are untouched;
    rebuilt entries get source "interpolated".
    """
    entries = list(track.entries)
    kf = [i for i, e in enumerate(entries) if e.keyframe]
    if len(kf) < 2:
        raise ValueError("interpolation needs at least 2 keyframes")
    for a, b in zip(kf[:-1], kf[1:]):
        b0, b1 = entries[a].box, entries[b].box
        f0, f1 = entries[a].frame, entries[b].frame
        dyaw = normalize_yaw(b1.yaw - b0.yaw)
        for i in range(a + 1, b):
            u = (entries[i].frame - f0) / (f1 - f0)
            box = Box7(
                b0.cx + u * (b1.cx - b0.cx),
                b0.cy + u * (b1.cy - b0.cy),
                b0.cz + u * (b1.cz - b0.cz),
                b0.length + u * (b1.length - b0.length),
                b0.width + u * (b1.width - b0.width),
                b0.height + u * (b1.height - b0.height),
                normalize_yaw(b0.yaw + u * dyaw),
            )
            entries[i] = TrackEntry(entries[i].frame, box, source="interpolated")
    return _clone(track, entries)


def _natural_smoother(t: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Natural cubic smoothing-spline values at the knots, solved directly.

    Used where the library fitter demands more points than the track has;
    agrees with it to machine precision where both apply.
    """
    n = len(t)
    h = np.diff(t)
    delta = np.zeros((n - 2, n))
    for i in range(n - 2):
        delta[i, i] = 1.0 / h[i]
        delta[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        delta[i, i + 2] = 1.0 / h[i + 1]
    w = np.zeros((n - 2, n - 2))
    for i in range(n - 2):
        w[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < n - 2:
            w[i, i + 1] = w[i + 1, i] = h[i + 1] / 6.0
    k = delta.T @ np.linalg.solve(w, delta)
    return np.linalg.solve(np.eye(n) + lam * k, y)


def smooth_trajectory(track: Tracklet,
                      smoothing_weight: float = DEFAULT_SMOOTHING_WEIGHT) -> Tracklet:
    """Smooth the x/y trajectory with a natural cubic smoothing spline.

    smoothing_weight in [0, 1] trades residual fit against roughness:
    0 interpolates the input centers exactly, 1 degenerates to the
    least-squares line. Sizes, z, and yaw are preserved; endpoint centers
    are clamped to within ENDPOINT_SHIFT_LIMIT of the originals.
    """
    if not 0.0 <= smoothing_weight <= 1.0:
        raise ValueError(f"smoothing_weight {smoothing_weight} outside [0, 1]")
    entries = track.entries
    if len(entries) < 4:
        raise ValueError("smoothing needs at least 4 entries")
    t = np.array([float(e.frame) for e in entries])
    xs = np.array([e.box.cx for e in entries])
    ys = np.array([e.box.cy for e in entries])

    if smoothing_weight == 1.0:
        fx = np.polyval(np.polyfit(t, xs, 1), t)
        fy = np.polyval(np.polyfit(t, ys, 1), t)
    else:
        lam = smoothing_weight / (1.0 - smoothing_weight) * len(entries)
        if len(entries) >= 5:
            fx = make_smoothing_spline(t, xs, lam=lam)(t)
            fy = make_smoothing_spline(t, ys, lam=lam)(t)
        else:
            fx = _natural_smoother(t, xs, lam)
            fy = _natural_smoother(t, ys, lam)

    for j in (0, len(entries) - 1):
        ddx, ddy = fx[j] - xs[j], fy[j] - ys[j]
        norm = math.hypot(ddx, ddy)
        if norm > ENDPOINT_SHIFT_LIMIT:
            scale = ENDPOINT_SHIFT_LIMIT / norm
            fx[j] = xs[j] + ddx * scale
            fy[j] = ys[j] + ddy * scale

    out = []
    for i, e in enumerate(entries):
        b = e.box
        out.append(_with_box(e, Box7(float(fx[i]), float(fy[i]), b.cz,
                                     b.length, b.width, b.height, b.yaw)))
    return _clone(track, out)


def reorient_from_motion(track: Tracklet,
                         speed_floor: float = DEFAULT_SPEED_FLOOR,
                         frame_rate: float = DEFAULT_FRAME_RATE) -> Tracklet:
    """Point each annotation along its direction of travel.

    Entries moving slower than speed_floor borrow the next later moving
    direction, then the last earlier one; a track that never moves keeps
    its first annotated yaw throughout.
    """
    entries = track.entries
    if len(entries) < 2:
        return _clone(track, list(entries))
    n = len(entries)
    moving = [None] * n
    for i in range(n):
        j0, j1 = (i, i + 1) if i + 1 < n else (i - 1, i)
        e0, e1 = entries[j0], entries[j1]
        dx = e1.box.cx - e0.box.cx
        dy = e1.box.cy - e0.box.cy
        dt = (e1.frame - e0.frame) / frame_rate
        if math.hypot(dx, dy) / dt >= speed_floor:
            moving[i] = math.atan2(dy, dx)

    filled = list(moving)
    later = None
    for i in range(n - 1, -1, -1):
        if moving[i] is not None:
            later = moving[i]
        elif later is not None:
            filled[i] = later
    earlier = None
    for i in range(n):
        if moving[i] is not None:
            earlier = moving[i]
        elif filled[i] is None and earlier is not None:
            filled[i] = earlier

    first_yaw = entries[0].box.yaw
    out = []
    for i, e in enumerate(entries):
        yaw = first_yaw if filled[i] is None else filled[i]
        b = e.box
        out.append(_with_box(e, Box7(b.cx, b.cy, b.cz, b.length, b.width,
                                     b.height, normalize_yaw(yaw))))
    return _clone(track, out)


def average_static_boxes(track: Tracklet,
                         static_displacement: float = DEFAULT_STATIC_DISPLACEMENT) -> Tracklet:
    """Replace a parked object's jittering boxes with their mean.

    Applies only when no two centers are further apart than
    static_displacement; yaw averages circularly.
    """
    entries = track.entries
    if len(entries) < 2:
        return _clone(track, list(entries))
    centers = np.array([e.box.center for e in entries])
    diffs = centers[:, None, :] - centers[None, :, :]
    if float(np.sqrt((diffs ** 2).sum(-1)).max()) > static_displacement:
        return _clone(track, list(entries))
    mean = centers.mean(axis=0)
    sizes = np.array([[e.box.length, e.box.width, e.box.height]
                      for e in entries]).mean(axis=0)
    yaws = np.array([e.box.yaw for e in entries])
    yaw = math.atan2(float(np.sin(yaws).mean()), float(np.cos(yaws).mean()))
    box = Box7(float(mean[0]), float(mean[1]), float(mean[2]),
               float(sizes[0]), float(sizes[1]), float(sizes[2]),
               normalize_yaw(yaw))
    return _clone(track, [_with_box(e, box) for e in entries])


def _average_speed(track: Tracklet, frame_rate: float) -> float:
    entries = track.entries
    if len(entries) < 2:
        return 0.0
    centers = np.array([e.box.center for e in entries])
    path = float(np.linalg.norm(np.diff(centers, axis=0), axis=1).sum())
    duration = (entries[-1].frame - entries[0].frame) / frame_rate
    return path / duration


def filter_tracks(tracks, params_by_class=None,
                  frame_rate: float = DEFAULT_FRAME_RATE):
    """Split tracks into (kept, flagged) without touching box data.

    Flags are (track, reason) pairs: "short" for tracks under the class
    minimum length, "speed_anomaly" for average speed over the class
    maximum (usually a misclassification, e.g. a cyclist labeled
    pedestrian).
    """
    params_by_class = params_by_class or {}
    kept, flagged = [], []
    for tr in tracks:
        params = params_by_class.get(tr.class_id) or default_class_params(tr.class_id)
        if len(tr.entries) < params.min_track_length:
            flagged.append((tr, "short"))
        elif _average_speed(tr, frame_rate) > params.max_speed:
            flagged.append((tr, "speed_anomaly"))
        else:
            kept.append(tr)
    return kept, flagged


def fix_id_switch(tracks, track_id: int, from_frame: int, new_id: int):
    """Move entries of track_id at or after from_frame onto new_id.

    new_id is created when absent. Raises on unknown track, on an empty
    move, and on any frame collision with new_id's existing entries; no
    input track is mutated either way.
    """
    by_id = {t.track_id: t for t in tracks}
    src = by_id.get(track_id)
    if src is None:
        raise ValueError(f"unknown track id {track_id}")
    moved = [e for e in src.entries if e.frame >= from_frame]
    if not moved:
        raise ValueError(
            f"track {track_id} has no entries at or after frame {from_frame}")
    kept_src = [e for e in src.entries if e.frame < from_frame]

    target = by_id.get(new_id)
    if target is not None:
        lo, hi = moved[0].frame, moved[-1].frame
        if any(lo <= e.frame <= hi for e in target.entries):
            raise ValueError(
                f"track {new_id} already has entries in frames {lo}..{hi}")
        merged = sorted(list(target.entries) + moved, key=lambda e: e.frame)
        new_target = Tracklet(new_id, target.class_id, entries=merged,
                              status=target.status)
    else:
        new_target = Tracklet(new_id, src.class_id, entries=moved,
                              status=src.status)

    out = []
    for t in tracks:
        if t.track_id == track_id:
            if kept_src:
                out.append(Tracklet(track_id, src.class_id, entries=kept_src,
                                    status=src.status))
        elif t.track_id == new_id:
            out.append(new_target)
        else:
            out.append(t)
    if target is None:
        out.append(new_target)
    return out


def flip_orientation(track: Tracklet, frames) -> Tracklet:
    """Rotate yaw by half a turn on the given frames; everything else kept."""
    wanted = set(frames)
    if not wanted:
        raise ValueError("empty frame range")
    if min(wanted) < track.first_frame or max(wanted) > track.last_frame:
        raise ValueError("frame range extends outside the track")
    out = []
    for e in track.entries:
        if e.frame in wanted:
            b = e.box
            out.append(_with_box(e, Box7(b.cx, b.cy, b.cz, b.length, b.width,
                                         b.height, normalize_yaw(b.yaw + math.pi))))
        else:
            out.append(e)
    return _clone(track, out)
