"""Oriented-box and point-cloud geometry primitives.

Boxes are 7-DoF: center (cx, cy, cz), size (length, width, height), and a
yaw heading about the vertical axis. Yaw is counterclockwise from +x in a
right-handed z-up frame; length runs along the heading, width across it.
Rotated overlaps are computed exactly by convex polygon clipping of the two
footprints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CLASSES = ("vehicle", "pedestrian", "cyclist", "motorcycle", "bus", "truck")

TWO_PI = 2.0 * math.pi


def normalize_yaw(angle: float) -> float:
    """Wrap an angle in radians to [-pi, pi)."""
    if not math.isfinite(angle):
        raise ValueError(f"non-finite angle: {angle!r}")
    return (angle + math.pi) % TWO_PI - math.pi


@dataclass
class Box7:
    """Oriented 3D bounding box with positive sizes and normalized yaw."""

    cx: float
    cy: float
    cz: float
    length: float
    width: float
    height: float
    yaw: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0 and self.height > 0):
            raise ValueError(
                f"box sizes must be positive, got "
                f"({self.length}, {self.width}, {self.height})"
            )
        self.yaw = normalize_yaw(float(self.yaw))

    @classmethod
    def from_array(cls, arr) -> "Box7":
        cx, cy, cz, length, width, height, yaw = (float(v) for v in arr)
        return cls(cx, cy, cz, length, width, height, yaw)

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.cx, self.cy, self.cz, self.length, self.width, self.height, self.yaw],
            dtype=float,
        )

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz], dtype=float)

    @property
    def volume(self) -> float:
        return self.length * self.width * self.height

    @property
    def footprint_area(self) -> float:
        return self.length * self.width

    def corners_bev(self) -> np.ndarray:
        """Footprint corner coordinates, shape (4, 2), counterclockwise."""
        hl, hw = 0.5 * self.length, 0.5 * self.width
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])

    def z_range(self) -> tuple:
        half = 0.5 * self.height
        return self.cz - half, self.cz + half


@dataclass
class PointCloud:
    """One frame of LiDAR points: (N, 4) array of x, y, z, intensity."""

    points: np.ndarray
    timestamp: float = 0.0
    frame_index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (3, 4):
            raise ValueError(f"points must be (N, 3) or (N, 4), got {pts.shape}")
        if pts.shape[1] == 3:
            pts = np.hstack([pts, np.zeros((len(pts), 1))])
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        self.points = pts

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Detection:
    """A scored, classified box proposal for one frame."""

    box: Box7
    class_id: str
    score: float

    def __post_init__(self):
        if self.class_id not in CLASSES:
            raise ValueError(f"unknown class {self.class_id!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of range: {self.score}")


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area of a simple polygon given as (N, 2) vertices."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject by a convex ccw clip polygon."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a = clip[i]
        b = clip[(i + 1) % n]
        edge = (b[0] - a[0], b[1] - a[1])
        inputs = output
        output = []
        for j, cur in enumerate(inputs):
            prev = inputs[j - 1]
            # left-of-edge test; boundary points count as inside
            cur_in = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0]) >= 0
            prev_in = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0]) >= 0
            if cur_in != prev_in:
                output.append(_line_intersection(prev, cur, a, b))
            if cur_in:
                output.append(cur)
    return np.array(output) if output else np.zeros((0, 2))


def _line_intersection(p1, p2, a, b):
    # intersection of segment p1-p2 with the infinite line through a-b
    dx, dy = p2[0] - p1[0], p2[1] - p1[1]
    ex, ey = b[0] - a[0], b[1] - a[1]
    denom = dx * ey - dy * ex
    if abs(denom) < 1e-12:
        return p2
    t = ((a[0] - p1[0]) * ey - (a[1] - p1[1]) * ex) / denom
    return (p1[0] + t * dx, p1[1] + t * dy)


def footprint_intersection_area(a: Box7, b: Box7) -> float:
    return polygon_area(clip_polygon(a.corners_bev(), b.corners_bev()))


def iou_bev(a: Box7, b: Box7) -> float:
    """IoU of the two boxes' rotated footprints."""
    inter = footprint_intersection_area(a, b)
    union = a.footprint_area + b.footprint_area - inter
    if union <= 0.0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def iou_3d(a: Box7, b: Box7) -> float:
    """Volumetric IoU: footprint intersection times vertical overlap."""
    inter_area = footprint_intersection_area(a, b)
    if inter_area <= 0.0:
        return 0.0
    alo, ahi = a.z_range()
    blo, bhi = b.z_range()
    dz = min(ahi, bhi) - max(alo, blo)
    if dz <= 0.0:
        return 0.0
    inter = inter_area * dz
    union = a.volume + b.volume - inter
    return float(min(max(inter / union, 0.0), 1.0))


def points_in_box(cloud, box: Box7, margin: float = 0.0) -> np.ndarray:
    """Indices of points inside the box inflated by margin on every side."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    xyz = cloud.xyz if isinstance(cloud, PointCloud) else np.asarray(cloud)[:, :3]
    if len(xyz) == 0:
        return np.zeros(0, dtype=int)
    d = xyz - box.center
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # rotate into the box frame (inverse rotation)
    local_x = c * d[:, 0] + s * d[:, 1]
    local_y = -s * d[:, 0] + c * d[:, 1]
    inside = (
        (np.abs(local_x) <= 0.5 * box.length + margin)
        & (np.abs(local_y) <= 0.5 * box.width + margin)
        & (np.abs(d[:, 2]) <= 0.5 * box.height + margin)
    )
    return np.flatnonzero(inside)


def nms(dets, iou_threshold: float, metric: str = "bev"):
    """Greedy class-aware non-maximum suppression, score descending.

    Ties in score are broken by input order. Boxes of different classes
    never suppress each other.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must be in (0, 1)")
    if metric == "bev":
        iou_fn = iou_bev
    elif metric == "3d":
        iou_fn = iou_3d
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    kept = []
    for i in order:
        det = dets[i]
        suppressed = any(
            k.class_id == det.class_id and iou_fn(k.box, det.box) > iou_threshold
            for k in kept
        )
        if not suppressed:
            kept.append(det)
    return kept
