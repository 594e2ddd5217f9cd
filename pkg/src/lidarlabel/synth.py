"""Synthetic intersection scenes with known ground truth.

A fixed elevated sensor at the origin watches scripted agents (lines,
arcs, stop-and-go) whose box surfaces are sampled with 1/r^2 range decay,
Gaussian position noise, and BEV angular shadowing by closer agents.
A noise-configurable oracle detector turns the ground truth into
detection sets, so every pipeline stage can be verified at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lidarlabel.detect_io import DetectionFrameSet
from lidarlabel.geometry import Box7, Detection, PointCloud, iou_bev, normalize_yaw
from lidarlabel.ground import plane_height_at
from lidarlabel.mot import DEFAULT_FRAME_RATE, TrackEntry, Tracklet, hungarian

TRAJECTORIES = ("line", "arc", "stop_and_go")

CLASS_SIZES = {
    "vehicle": (4.2, 1.9, 1.6),
    "pedestrian": (0.8, 0.8, 1.7),
    "cyclist": (1.8, 0.8, 1.7),
    "motorcycle": (2.2, 0.9, 1.4),
    "bus": (12.0, 2.9, 3.4),
    "truck": (8.5, 2.6, 3.2),
}

DEFAULT_BOUNDS = (-40.0, 40.0, -40.0, 40.0)


@dataclass
class AgentSpec:
    class_id: str
    start: tuple = (0.0, 0.0)
    heading: float = 0.0
    speed: float = 0.0
    trajectory: str = "line"
    spawn_frame: int = 0
    end_frame: int = None
    size: tuple = None
    turn_rate: float = 0.0  # rad/s, arc only
    move_frames: int = 20   # stop_and_go cadence
    stop_frames: int = 20

    def __post_init__(self):
        if self.class_id not in CLASS_SIZES:
            raise ValueError(f"unknown class {self.class_id!r}")
        if self.trajectory not in TRAJECTORIES:
            raise ValueError(f"unknown trajectory {self.trajectory!r}")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if self.size is None:
            self.size = CLASS_SIZES[self.class_id]


@dataclass
class SceneConfig:
    duration: int
    agents: list
    frame_rate: float = DEFAULT_FRAME_RATE
    sensor_height: float = 3.0
    density: float = 800.0       # expected points = density * area / r^2
    noise_sigma: float = 0.0
    ground_density: float = 0.02  # points per m^2 of scene footprint
    ground_plane: tuple = (0.0, 0.0, 1.0, 0.0)
    bounds: tuple = DEFAULT_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("duration must be >= 1")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be > 0")
        if self.density <= 0:
            raise ValueError("density must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        xmin, xmax, ymin, ymax = self.bounds
        if xmin >= xmax or ymin >= ymax:
            raise ValueError(f"degenerate bounds {self.bounds}")


@dataclass
class SceneSequence:
    frames: list
    gt_tracks: list
    ground_plane: tuple = (0.0, 0.0, 1.0, 0.0)
    bounds: tuple = DEFAULT_BOUNDS
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        n = len(self.frames)
        for tr in self.gt_tracks:
            if tr.entries and not (0 <= tr.first_frame and tr.last_frame < n):
                raise ValueError(
                    f"track {tr.track_id} spans frames outside the sequence")

    def __len__(self) -> int:
        return len(self.frames)


def _agent_pose(agent: AgentSpec, t: int, frame_rate: float):
    """Center xy and yaw of an agent t frames after spawn."""
    dt = 1.0 / frame_rate
    x, y = agent.start
    yaw = agent.heading
    if agent.trajectory == "line":
        d = agent.speed * t * dt
        return x + d * math.cos(yaw), y + d * math.sin(yaw), yaw
    if agent.trajectory == "arc":
        for _ in range(t):
            x += agent.speed * dt * math.cos(yaw)
            y += agent.speed * dt * math.sin(yaw)
            yaw = normalize_yaw(yaw + agent.turn_rate * dt)
        return x, y, yaw
    # stop_and_go: advance only during the moving phase of each cycle
    cycle = agent.move_frames + agent.stop_frames
    full, rem = divmod(t, cycle)
    moved = full * agent.move_frames + min(rem, agent.move_frames)
    d = agent.speed * moved * dt
    return x + d * math.cos(yaw), y + d * math.sin(yaw), yaw


def _sample_surface(box: Box7, n: int, rng) -> np.ndarray:
    """n points uniform over the four lateral faces and the top, (n,4)."""
    if n <= 0:
        return np.zeros((0, 4))
    hl, hw, hh = box.length / 2, box.width / 2, box.height / 2
    areas = np.array([
        box.width * box.height, box.width * box.height,
        box.length * box.height, box.length * box.height,
        box.length * box.width,
    ])
    faces = rng.choice(5, size=n, p=areas / areas.sum())
    u = rng.uniform(-1.0, 1.0, n)
    v = rng.uniform(-1.0, 1.0, n)
    local = np.empty((n, 3))
    for f, (ax, sign) in enumerate([(0, 1), (0, -1), (1, 1), (1, -1), (2, 1)]):
        m = faces == f
        if ax == 0:
            local[m, 0] = sign * hl
            local[m, 1] = u[m] * hw
            local[m, 2] = v[m] * hh
        elif ax == 1:
            local[m, 0] = u[m] * hl
            local[m, 1] = sign * hw
            local[m, 2] = v[m] * hh
        else:
            local[m, 0] = u[m] * hl
            local[m, 1] = v[m] * hw
            local[m, 2] = sign * hh
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    world = np.empty((n, 4))
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + box.cx
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + box.cy
    world[:, 2] = local[:, 2] + box.cz
    world[:, 3] = 0.0
    return world


def _angular_interval(box: Box7):
    """(center angle, half width, near range) of the box seen from origin."""
    corners = box.corners_bev()
    angles = np.arctan2(corners[:, 1], corners[:, 0])
    ranges = np.hypot(corners[:, 0], corners[:, 1])
    mid = math.atan2(box.cy, box.cx)
    rel = np.array([normalize_yaw(a - mid) for a in angles])
    return mid, float(np.abs(rel).max()), float(ranges.min())


def _shadowed(points: np.ndarray, occluders) -> np.ndarray:
    """Mask of points hidden behind any closer occluder interval."""
    mask = np.zeros(len(points), dtype=bool)
    if not occluders or not len(points):
        return mask
    phi = np.arctan2(points[:, 1], points[:, 0])
    rho = np.hypot(points[:, 0], points[:, 1])
    for mid, half, near in occluders:
        rel = np.abs((phi - mid + math.pi) % (2 * math.pi) - math.pi)
        mask |= (rel <= half) & (rho > near)
    return mask


def _footprint_mask(xy: np.ndarray, boxes) -> np.ndarray:
    """Mask of xy points inside any box footprint."""
    mask = np.zeros(len(xy), dtype=bool)
    for b in boxes:
        c, s = math.cos(b.yaw), math.sin(b.yaw)
        dx = xy[:, 0] - b.cx
        dy = xy[:, 1] - b.cy
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        mask |= (np.abs(lx) <= b.length / 2) & (np.abs(ly) <= b.width / 2)
    return mask


def generate_scene(config: SceneConfig) -> SceneSequence:
    """Render the configured agents into point-cloud frames plus gt tracks."""
    poses = {}  # (agent index, frame) -> Box7
    tracks = []
    for k, agent in enumerate(config.agents):
        entries = []
        end = config.duration if agent.end_frame is None else \
            min(agent.end_frame, config.duration)
        for t in range(agent.spawn_frame, end):
            x, y, yaw = _agent_pose(agent, t - agent.spawn_frame,
                                    config.frame_rate)
            z = plane_height_at(config.ground_plane, x, y)
            l, w, h = agent.size
            box = Box7(x, y, z + h / 2, l, w, h, yaw)
            poses[(k, t)] = box
            entries.append(TrackEntry(t, box, source="manual"))
        tracks.append(Tracklet(k + 1, agent.class_id, entries=entries,
                               status="confirmed"))

    xmin, xmax, ymin, ymax = config.bounds
    area_ground = (xmax - xmin) * (ymax - ymin)
    frames = []
    for t in range(config.duration):
        rng = np.random.default_rng([config.seed, t, 0])
        boxes = [(k, poses[(k, t)]) for k in range(len(config.agents))
                 if (k, t) in poses]
        # nearer agents shadow farther ones; sort so each agent only
        # checks intervals of strictly closer boxes
        order = sorted(boxes, key=lambda kb: math.hypot(kb[1].cx, kb[1].cy))
        parts = []
        occluders = []
        for _, box in order:
            r = max(1.0, math.hypot(box.cx, box.cy))
            area = (2 * (box.length + box.width) * box.height
                    + box.length * box.width)
            n = rng.poisson(config.density * area / (r * r))
            pts = _sample_surface(box, int(n), rng)
            if len(pts):
                pts = pts[~_shadowed(pts, occluders)]
            if config.noise_sigma > 0 and len(pts):
                pts[:, :3] += rng.normal(0.0, config.noise_sigma,
                                         size=(len(pts), 3))
            parts.append(pts)
            occluders.append(_angular_interval(box))

        n_ground = rng.poisson(config.ground_density * area_ground)
        if n_ground:
            gx = rng.uniform(xmin, xmax, n_ground)
            gy = rng.uniform(ymin, ymax, n_ground)
            gxy = np.column_stack([gx, gy])
            keep = ~_footprint_mask(gxy, [b for _, b in order])
            gxy = gxy[keep]
            gz = np.array([plane_height_at(config.ground_plane, x, y)
                           for x, y in gxy])
            gpts = np.column_stack([gxy, gz, np.zeros(len(gxy))])
            if config.noise_sigma > 0 and len(gpts):
                gpts[:, :3] += rng.normal(0.0, config.noise_sigma,
                                          size=(len(gpts), 3))
            parts.append(gpts)

        pts = np.vstack(parts) if parts else np.zeros((0, 4))
        frames.append(PointCloud(pts, timestamp=t / config.frame_rate,
                                 frame_index=t))
    return SceneSequence(frames=frames, gt_tracks=tracks,
                         ground_plane=config.ground_plane,
                         bounds=config.bounds, frame_rate=config.frame_rate)


def synth_detector(seq: SceneSequence, dropout: float = 0.0,
                   fp_rate: float = 0.0, box_noise: float = 0.0,
                   tp_score=(1.0, 1.0), fp_score=(0.1, 0.45),
                   seed: int = 0) -> DetectionFrameSet:
    """Turn ground truth into a detection set with configurable failure.

    Each gt box is independently dropped with probability dropout;
    survivors get centers perturbed by box_noise and scores drawn from
    tp_score. Poisson(fp_rate) false positives per frame are placed
    uniformly in the scene bounds with fp_score. Deterministic per seed.
    """
    if not 0.0 <= dropout <= 1.0:
        raise ValueError("dropout must be in [0, 1]")
    if fp_rate < 0 or box_noise < 0:
        raise ValueError("rates must be >= 0")
    by_frame = {}
    for tr in seq.gt_tracks:
        for e in tr.entries:
            by_frame.setdefault(e.frame, []).append((tr.class_id, e.box))

    xmin, xmax, ymin, ymax = seq.bounds
    classes = sorted(CLASS_SIZES)
    frames = []
    for t in range(len(seq.frames)):
        rng = np.random.default_rng([seed, t, 1])
        dets = []
        for class_id, box in by_frame.get(t, []):
            if rng.uniform() < dropout:
                continue
            b = box
            if box_noise > 0:
                dxyz = rng.normal(0.0, box_noise, 3)
                b = Box7(box.cx + dxyz[0], box.cy + dxyz[1], box.cz + dxyz[2],
                         box.length, box.width, box.height, box.yaw)
            dets.append(Detection(box=b, class_id=class_id,
                                  score=float(rng.uniform(*tp_score))))
        for _ in range(rng.poisson(fp_rate)):
            cls = classes[rng.integers(len(classes))]
            l, w, h = CLASS_SIZES[cls]
            x = float(rng.uniform(xmin, xmax))
            y = float(rng.uniform(ymin, ymax))
            z = plane_height_at(seq.ground_plane, x, y) + h / 2
            yaw = float(rng.uniform(-math.pi, math.pi))
            dets.append(Detection(box=Box7(x, y, z, l, w, h, yaw),
                                  class_id=cls,
                                  score=float(rng.uniform(*fp_score))))
        frames.append(dets)
    return DetectionFrameSet(frames=frames, source="synthetic")


def count_id_switches(pred_tracks, gt_tracks, iou_threshold: float = 0.3) -> int:
    """Diagnostic: how often a gt object's matched predicted id changes.

    Frame-by-frame Hungarian matching on BEV IoU within each class; a
    switch is a gt track whose consecutive matched frames carry different
    predicted ids (unmatched gaps are skipped, not counted).
    """
    def by_class_frame(tracks):
        out = {}
        for tr in tracks:
            for e in tr.entries:
                out.setdefault((tr.class_id, e.frame), []).append(
                    (tr.track_id, e.box))
        return out

    preds = by_class_frame(pred_tracks)
    gts = by_class_frame(gt_tracks)
    assigned = {}  # gt id -> list of matched pred ids in frame order
    for key in sorted(gts, key=lambda k: (k[0], k[1])):
        g = gts[key]
        p = preds.get(key, [])
        if p:
            cost = np.full((len(g), len(p)), np.inf)
            for i, (_, gb) in enumerate(g):
                for j, (_, pb) in enumerate(p):
                    v = iou_bev(gb, pb)
                    if v >= iou_threshold:
                        cost[i, j] = 1.0 - v
            matches = hungarian(cost)
        else:
            matches = {}
        for i, (gid, _) in enumerate(g):
            if i in matches:
                assigned.setdefault(gid, []).append(p[matches[i]][0])

    switches = 0
    for ids in assigned.values():
        switches += sum(1 for a, b in zip(ids, ids[1:]) if a != b)
    return switches
