"""Single-object annotation propagation.

Given one annotated box, follow the object forward frame by frame inside a
class-specific search radius. Each step estimates a motion vector
(dx, dy, dz, dyaw) in two stages: a coarse capture-count search over a
centroid-seeded translation grid plus a discrete yaw sweep, then a
refinement that merges the motion-compensated previous target points with
the current in-box points and re-centers on the denser merged cloud. Box
size stays frozen for the whole run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import trim_mean

from lidarlabel.geometry import Box7, PointCloud, normalize_yaw, points_in_box
from lidarlabel.mot import TrackEntry

DEFAULT_HORIZON = 100
DEFAULT_KEYFRAME_EVERY = 10

SEARCH_RADIUS_BY_CLASS = {
    "vehicle": 2.0,
    "pedestrian": 0.5,
    "cyclist": 1.0,
    "motorcycle": 1.5,
    "bus": 2.0,
    "truck": 2.0,
}


class LostTrackError(RuntimeError):
    """Raised when the tracker cannot find the target near its last location."""


@dataclass
class MotionVector:
    dx: float
    dy: float
    dz: float
    dyaw: float

    def __post_init__(self):
        vals = (self.dx, self.dy, self.dz, self.dyaw)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite motion vector {vals}")
        self.dyaw = normalize_yaw(self.dyaw)


@dataclass
class SotParams:
    search_radius: float = 2.0
    horizon: int = DEFAULT_HORIZON
    target_margin: float = 0.3
    yaw_halfwidth: float = math.radians(15.0)
    yaw_step: float = math.radians(1.5)
    keyframe_every: int = DEFAULT_KEYFRAME_EVERY
    min_points: int = 3
    max_lost_frames: int = 3
    # points lying exactly on a face (noiseless returns) must count as
    # captured despite float jitter, so counting uses a small margin
    count_margin: float = 0.05

    def __post_init__(self):
        if self.search_radius <= 0:
            raise ValueError("search_radius must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def default_sot_params(class_id: str, **overrides) -> SotParams:
    params = SotParams(search_radius=SEARCH_RADIUS_BY_CLASS.get(class_id, 2.0))
    for key, val in overrides.items():
        setattr(params, key, val)
    return params


def crop_search_region(cloud: PointCloud, center, radius: float) -> PointCloud:
    """Points within horizontal distance radius of center."""
    if radius <= 0:
        raise ValueError("radius must be > 0")
    dx = cloud.points[:, 0] - center[0]
    dy = cloud.points[:, 1] - center[1]
    mask = dx * dx + dy * dy <= radius * radius
    return PointCloud(cloud.points[mask], timestamp=cloud.timestamp,
                      frame_index=cloud.frame_index)


def _robust_centroid(xyz: np.ndarray) -> np.ndarray:
    if len(xyz) == 0:
        raise ValueError("empty point set")
    return trim_mean(xyz, 0.1, axis=0)


def _count_captured(xyz: np.ndarray, box: Box7, margin: float) -> int:
    return len(points_in_box(xyz, box, margin=margin))


def _shift_box(box: Box7, dx, dy, dz, dyaw=0.0) -> Box7:
    return Box7(box.cx + dx, box.cy + dy, box.cz + dz,
                box.length, box.width, box.height,
                normalize_yaw(box.yaw + dyaw))


def _clamp_horizontal(dx, dy, radius):
    norm = math.hypot(dx, dy)
    if norm > radius:
        scale = radius / norm
        return dx * scale, dy * scale
    return dx, dy


def _extent_midrange(xyz: np.ndarray, box: Box7) -> np.ndarray:
    """World-frame offset from the box center to the cloud's extent midpoint.

    On surface returns the per-axis min and max land on opposite faces, so
    the midpoint recovers the object center even when the box itself sits
    off by several centimeters.
    """
    rel = xyz[:, :3] - box.center
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    local = np.empty_like(rel)
    local[:, 0] = c * rel[:, 0] + s * rel[:, 1]
    local[:, 1] = -s * rel[:, 0] + c * rel[:, 1]
    local[:, 2] = rel[:, 2]
    mid = 0.5 * (local.min(axis=0) + local.max(axis=0))
    return np.array([c * mid[0] - s * mid[1], s * mid[0] + c * mid[1], mid[2]])


def _estimate(prev_target: np.ndarray, search: np.ndarray, prev_box: Box7,
              params: SotParams):
    """Coarse motion plus the capture count supporting it."""
    if len(prev_target) == 0:
        raise ValueError("previous target points must be non-empty")
    if len(search) == 0:
        raise LostTrackError("search region is empty")
    prev_centroid = _robust_centroid(prev_target[:, :3])

    # centroid-seeded translation grid
    seed = _robust_centroid(search[:, :3]) - prev_centroid
    sdx, sdy = _clamp_horizontal(float(seed[0]), float(seed[1]), params.search_radius)
    offsets = np.linspace(-0.5, 0.5, 5)
    best = None
    for ox in offsets:
        for oy in offsets:
            dx, dy = _clamp_horizontal(sdx + ox, sdy + oy, params.search_radius)
            cand = _shift_box(prev_box, dx, dy, 0.0)
            count = _count_captured(search, cand, params.target_margin)
            key = (-count, math.hypot(dx, dy))
            if best is None or key < best[0]:
                best = (key, (dx, dy))
    dx, dy = best[1]

    gate = _shift_box(prev_box, dx, dy, 0.0)
    idx = points_in_box(search, gate, margin=params.target_margin)
    captured = len(idx)
    if captured == 0:
        return MotionVector(0.0, 0.0, 0.0, 0.0), 0
    cand_centroid = _robust_centroid(search[idx, :3])
    delta = cand_centroid - prev_centroid
    dx, dy = _clamp_horizontal(float(delta[0]), float(delta[1]), params.search_radius)
    dz = float(delta[2])

    # the trimmed centroid is jumpy when many returns sit exactly on a
    # face (the trim boundary lands inside the atom), so re-anchor the
    # translation on the captured extent midpoint
    moved = _shift_box(prev_box, dx, dy, dz)
    anchor = _extent_midrange(search[idx, :3], moved)
    dx, dy = _clamp_horizontal(dx + float(anchor[0]), dy + float(anchor[1]),
                               params.search_radius)
    dz += float(anchor[2])

    # discrete yaw sweep: a rotation must beat the zero-yaw capture count
    # by a clear gain, otherwise boundary jitter would random-walk the yaw
    anchored = _shift_box(prev_box, dx, dy, dz)
    base_count = _count_captured(search, anchored, params.count_margin)
    threshold = base_count + max(2, math.ceil(0.02 * base_count))
    n_steps = int(round(params.yaw_halfwidth / params.yaw_step))
    best_theta = 0.0
    best_count = base_count
    for k in range(-n_steps, n_steps + 1):
        if k == 0:
            continue
        theta = k * params.yaw_step
        cand = _shift_box(anchored, 0.0, 0.0, 0.0, theta)
        count = _count_captured(search, cand, params.count_margin)
        if count < threshold:
            continue
        if count > best_count or (count == best_count and abs(theta) < abs(best_theta)):
            best_count = count
            best_theta = theta
    return MotionVector(dx, dy, dz, best_theta), captured


def estimate_motion(prev_target_points, search_points, prev_box: Box7,
                    params: SotParams) -> MotionVector:
    """Coarse motion vector for one propagation step."""
    prev = prev_target_points.points if isinstance(prev_target_points, PointCloud) \
        else np.asarray(prev_target_points, dtype=float)
    search = search_points.points if isinstance(search_points, PointCloud) \
        else np.asarray(search_points, dtype=float)
    motion, _ = _estimate(prev, search, prev_box, params)
    return motion


# below this many fresh in-box points, the extent midpoint falls back to
# the merged cloud: with so few returns a face can easily lack a sample,
# and the compensated history fills the gap
REFINE_DENSE_COUNT = 12


def refine_box(prev_target_points, current_points, coarse_box: Box7,
               motion: MotionVector, max_correction: float = 0.5,
               gate_margin: float = 0.3) -> Box7:
    """Re-center the coarse box on the merged, motion-compensated cloud.

    Previous target points are moved by the motion vector (rotation about
    the previous center, then translation) and merged with the current
    points inside the inflated coarse box. The center correction is the
    extent midpoint of the fresh points when they are dense, of the merged
    cloud otherwise, clamped to max_correction. Size is held fixed.
    """
    prev = prev_target_points.points if isinstance(prev_target_points, PointCloud) \
        else np.asarray(prev_target_points, dtype=float)
    cur = current_points.points if isinstance(current_points, PointCloud) \
        else np.asarray(current_points, dtype=float)

    prev_center = np.array([coarse_box.cx - motion.dx,
                            coarse_box.cy - motion.dy,
                            coarse_box.cz - motion.dz])
    cur_part = np.zeros((0, 3))
    if len(cur):
        idx = points_in_box(cur, coarse_box, margin=gate_margin)
        cur_part = cur[idx, :3]
    prev_part = np.zeros((0, 3))
    if len(prev):
        c, s = math.cos(motion.dyaw), math.sin(motion.dyaw)
        rel = prev[:, :3] - prev_center
        moved = np.empty_like(rel)
        moved[:, 0] = c * rel[:, 0] - s * rel[:, 1]
        moved[:, 1] = s * rel[:, 0] + c * rel[:, 1]
        moved[:, 2] = rel[:, 2]
        moved += prev_center + np.array([motion.dx, motion.dy, motion.dz])
        prev_part = moved[points_in_box(moved, coarse_box, margin=gate_margin)]

    if len(cur_part) >= REFINE_DENSE_COUNT:
        basis = cur_part
    elif len(cur_part) + len(prev_part) > 0:
        basis = np.vstack([p for p in (prev_part, cur_part) if len(p)])
    else:
        return coarse_box

    correction = _extent_midrange(basis, coarse_box)
    norm = float(np.linalg.norm(correction))
    if norm > max_correction:
        correction *= max_correction / norm
    return Box7(
        coarse_box.cx + float(correction[0]),
        coarse_box.cy + float(correction[1]),
        coarse_box.cz + float(correction[2]),
        coarse_box.length, coarse_box.width, coarse_box.height,
        normalize_yaw(coarse_box.yaw),
    )


@dataclass
class PropagationResult:
    entries: list
    notice: str = None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def propagate(seq, start_box: Box7, start_frame: int, class_id: str,
              params: SotParams = None) -> PropagationResult:
    """Propagate an annotation forward min(horizon, remaining) frames.

    Every keyframe_every-th produced annotation is flagged as a keyframe.
    Losing the target (too few captured points for max_lost_frames steps)
    or leaving the scene bounds stops early with a notice; the produced
    prefix is still returned.
    """
    params = params or default_sot_params(class_id)
    frames = seq.frames
    if start_frame < 0 or start_frame + 1 >= len(frames):
        raise ValueError(f"no frames to propagate into after frame {start_frame}")
    bounds = getattr(seq, "bounds", None)

    prev_box = start_box
    prev_cloud = frames[start_frame]
    prev_idx = points_in_box(prev_cloud.points, prev_box, margin=params.count_margin)
    prev_target = prev_cloud.points[prev_idx]
    last_motion = MotionVector(0.0, 0.0, 0.0, 0.0)

    entries = []
    notice = None
    lost_streak = 0
    n_steps = min(params.horizon, len(frames) - 1 - start_frame)
    # the search must cover the box extent, not just its center: K bounds
    # the center displacement, the circumradius covers the footprint
    crop_radius = params.search_radius + math.hypot(
        0.5 * start_box.length, 0.5 * start_box.width)
    for i in range(1, n_steps + 1):
        t = start_frame + i
        cloud = frames[t]
        search = crop_search_region(cloud, (prev_box.cx, prev_box.cy), crop_radius)
        if len(prev_target) == 0 or len(search) == 0:
            motion, captured = last_motion, 0
        else:
            motion, captured = _estimate(prev_target, search.points, prev_box, params)

        if captured < params.min_points:
            lost_streak += 1
            if lost_streak >= params.max_lost_frames:
                notice = f"lost track at frame {t}"
                break
            motion = last_motion  # coast on the last reliable motion
            coarse = _shift_box(prev_box, motion.dx, motion.dy, motion.dz, motion.dyaw)
            refined = coarse
        else:
            lost_streak = 0
            coarse = _shift_box(prev_box, motion.dx, motion.dy, motion.dz, motion.dyaw)
            refined = refine_box(prev_target, cloud.points, coarse, motion,
                                 gate_margin=params.target_margin)
            # the hard per-step gate applies to the final box too
            step_dx, step_dy = refined.cx - prev_box.cx, refined.cy - prev_box.cy
            gx, gy = _clamp_horizontal(step_dx, step_dy, params.search_radius)
            if (gx, gy) != (step_dx, step_dy):
                refined = Box7(prev_box.cx + gx, prev_box.cy + gy, refined.cz,
                               refined.length, refined.width, refined.height,
                               refined.yaw)
            last_motion = motion

        if bounds is not None:
            xmin, xmax, ymin, ymax = bounds
            if not (xmin <= refined.cx <= xmax and ymin <= refined.cy <= ymax):
                notice = f"left scene bounds at frame {t}"
                break

        entries.append(TrackEntry(t, refined, source="auto_sot",
                                  keyframe=(i % params.keyframe_every == 0)))
        prev_box = refined
        idx = points_in_box(cloud.points, refined, margin=params.count_margin)
        if len(idx) >= params.min_points:
            prev_target = cloud.points[idx]
    return PropagationResult(entries=entries, notice=notice)
