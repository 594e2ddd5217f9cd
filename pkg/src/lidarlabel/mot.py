"""Tracking-by-detection multi-object tracking.

A constant-velocity Kalman filter proposes each track's next location,
two-stage Hungarian association links detections to tracks (high-score
detections first, then a relaxed floor to bridge occlusion), and lifecycle
rules govern track birth and death. The fixed LiDAR viewpoint makes this
simple motion model a strong predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from lidarlabel.geometry import Box7, Detection, iou_bev, normalize_yaw

TRACK_SOURCES = ("auto_mot", "auto_mot_predicted", "auto_sot", "interpolated", "manual")
TRACK_STATUSES = ("tentative", "confirmed", "dead")

DEFAULT_FRAME_RATE = 10.0


@dataclass
class TrackEntry:
    """One frame of a tracklet: a box plus source and keyframe flags."""

    frame: int
    box: Box7
    source: str = "manual"
    keyframe: bool = False

    def __post_init__(self):
        if self.source not in TRACK_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.frame < 0:
            raise ValueError("frame must be >= 0")


@dataclass
class Tracklet:
    """One object's identified sequence of per-frame boxes."""

    track_id: int
    class_id: str
    entries: list = field(default_factory=list)
    status: str = "confirmed"
    misses: int = 0

    def __post_init__(self):
        if self.status not in TRACK_STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        frames = [e.frame for e in self.entries]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("entry frames must be strictly increasing")

    def append(self, entry: TrackEntry):
        if self.status == "dead":
            raise ValueError(f"track {self.track_id} is dead")
        if self.entries and entry.frame <= self.entries[-1].frame:
            raise ValueError(
                f"frame {entry.frame} not after {self.entries[-1].frame} "
                f"in track {self.track_id}"
            )
        self.entries.append(entry)

    def entry_at(self, frame: int):
        for e in self.entries:
            if e.frame == frame:
                return e
        return None

    @property
    def first_frame(self) -> int:
        return self.entries[0].frame

    @property
    def last_frame(self) -> int:
        return self.entries[-1].frame

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class KalmanConfig:
    """Noise and initialization settings for the constant-velocity filter."""

    q_pos: float = 0.5
    q_yaw: float = 0.05
    q_vel: float = 0.5
    r_pos: float = 0.1
    r_yaw: float = 0.1
    p0_pos: float = 1.0
    p0_yaw: float = 1.0
    p0_vel: float = 10.0
    size_ema: float = 0.3


@dataclass
class KalmanState:
    """State (x, y, z, yaw, vx, vy, vz), covariance, and carried box size."""

    x: np.ndarray
    P: np.ndarray
    size: np.ndarray

    def box(self) -> Box7:
        return Box7(
            float(self.x[0]), float(self.x[1]), float(self.x[2]),
            float(self.size[0]), float(self.size[1]), float(self.size[2]),
            normalize_yaw(float(self.x[3])),
        )


_H = np.zeros((4, 7))
_H[0, 0] = _H[1, 1] = _H[2, 2] = _H[3, 3] = 1.0


def kf_init(det: Detection, config: KalmanConfig = None) -> KalmanState:
    """Start a filter at a detection with zero velocity."""
    config = config or KalmanConfig()
    b = det.box
    x = np.array([b.cx, b.cy, b.cz, b.yaw, 0.0, 0.0, 0.0])
    P = np.diag(
        [config.p0_pos] * 3 + [config.p0_yaw] + [config.p0_vel] * 3
    ).astype(float)
    size = np.array([b.length, b.width, b.height])
    return KalmanState(x=x, P=P, size=size)


def _transition(dt: float) -> np.ndarray:
    F = np.eye(7)
    F[0, 4] = F[1, 5] = F[2, 6] = dt
    return F


def _process_noise(dt: float, config: KalmanConfig) -> np.ndarray:
    return np.diag(
        [config.q_pos * dt] * 3 + [config.q_yaw * dt] + [config.q_vel * dt] * 3
    )


def kf_predict(state: KalmanState, dt: float, config: KalmanConfig = None):
    """Constant-velocity propagation; returns the new state and its box."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    config = config or KalmanConfig()
    F = _transition(dt)
    x = F @ state.x
    P = F @ state.P @ F.T + _process_noise(dt, config)
    out = KalmanState(x=x, P=P, size=state.size.copy())
    return out, out.box()


def kf_update(state: KalmanState, det: Detection, config: KalmanConfig = None) -> KalmanState:
    """Measurement update on (x, y, z, yaw) with wrapped yaw innovation."""
    config = config or KalmanConfig()
    b = det.box
    z = np.array([b.cx, b.cy, b.cz, b.yaw])
    innovation = z - _H @ state.x
    innovation[3] = normalize_yaw(innovation[3])
    R = np.diag([config.r_pos] * 3 + [config.r_yaw])
    S = _H @ state.P @ _H.T + R
    K = state.P @ _H.T @ np.linalg.inv(S)
    x = state.x + K @ innovation
    x[3] = normalize_yaw(x[3])
    # Joseph form keeps the covariance symmetric PSD
    ikh = np.eye(7) - K @ _H
    P = ikh @ state.P @ ikh.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    a = config.size_ema
    size = (1.0 - a) * state.size + a * np.array([b.length, b.width, b.height])
    return KalmanState(x=x, P=P, size=size)


def hungarian(cost) -> dict:
    """Minimum-cost maximum matching; returns a row -> column map.

    Entries must be nonnegative; numpy.inf marks a forbidden pair.
    Infinite entries are replaced by a constant large enough that any
    matching using fewer forbidden pairs always wins, which makes the
    result a maximum matching over admissible pairs with minimum total
    cost among those.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2D matrix")
    if cost.size == 0:
        return {}
    if np.isnan(cost).any():
        raise ValueError("cost contains NaN")
    finite = cost[np.isfinite(cost)]
    if finite.size and finite.min() < 0:
        raise ValueError("cost entries must be nonnegative")
    if finite.size == 0:
        return {}
    big = (finite.max() + 1.0) * (min(cost.shape) + 1)
    work = np.where(np.isfinite(cost), cost, big)
    rows, cols = linear_sum_assignment(work)
    return {int(r): int(c) for r, c in zip(rows, cols) if np.isfinite(cost[r, c])}


@dataclass
class AssocParams:
    """Two-stage association thresholds, cost metric, gate, and lifecycle."""

    stage1_score: float = 0.5
    stage2_score: float = 0.2
    cost_metric: str = "one_minus_bev_iou"
    gate: float = 0.9
    hits_to_confirm: int = 2
    max_misses: int = 10

    def __post_init__(self):
        if not (0.0 < self.stage2_score < self.stage1_score < 1.0):
            raise ValueError("need 0 < stage2_score < stage1_score < 1")
        if self.cost_metric not in ("one_minus_bev_iou", "center_distance"):
            raise ValueError(f"unknown cost_metric {self.cost_metric!r}")
        if self.gate <= 0:
            raise ValueError("gate must be > 0")
        if self.hits_to_confirm < 1 or self.max_misses < 0:
            raise ValueError("bad lifecycle counts")


_SMALL_FOOTPRINT_GATE = {"pedestrian": 0.5, "cyclist": 1.0,
                         "motorcycle": 1.5}


def default_assoc_params(class_id: str) -> AssocParams:
    """Per-class defaults: IoU cost for large footprints; center distance
    with the class search radius as gate where the footprint is too small
    for IoU to be a stable signal."""
    gate = _SMALL_FOOTPRINT_GATE.get(class_id)
    if gate is not None:
        return AssocParams(cost_metric="center_distance", gate=gate)
    return AssocParams()


def _pair_cost(tracklet: Tracklet, box: Box7, det: Detection, params: AssocParams) -> float:
    if det.class_id != tracklet.class_id:
        return math.inf
    if params.cost_metric == "one_minus_bev_iou":
        cost = 1.0 - iou_bev(box, det.box)
    else:
        cost = math.hypot(det.box.cx - box.cx, det.box.cy - box.cy)
    return cost if cost <= params.gate else math.inf


def associate_two_stage(predicted, dets, params: AssocParams):
    """Match predicted tracks to detections in two score tiers.

    predicted is a list of (Tracklet, Box7) pairs. Returns (matches,
    unmatched_track_indices, unmatched_det_indices) with matches as
    (track_index, det_index) pairs. Each detection is matched at most
    once; pairs costlier than the gate never match.
    """
    matches = []
    matched_tracks = set()
    matched_dets = set()
    for floor in (params.stage1_score, params.stage2_score):
        track_idx = [i for i in range(len(predicted)) if i not in matched_tracks]
        det_idx = [
            j for j in range(len(dets))
            if j not in matched_dets and dets[j].score >= floor
        ]
        if not track_idx or not det_idx:
            continue
        cost = np.array(
            [
                [_pair_cost(predicted[i][0], predicted[i][1], dets[j], params) for j in det_idx]
                for i in track_idx
            ]
        )
        for r, c in hungarian(cost).items():
            matches.append((track_idx[r], det_idx[c]))
            matched_tracks.add(track_idx[r])
            matched_dets.add(det_idx[c])
    unmatched_tracks = [i for i in range(len(predicted)) if i not in matched_tracks]
    unmatched_dets = [j for j in range(len(dets)) if j not in matched_dets]
    return matches, unmatched_tracks, unmatched_dets


@dataclass
class _LiveTrack:
    tracklet: Tracklet
    state: KalmanState
    consecutive_hits: int = 0


class MotTracker:
    """Stateful per-sequence tracker; fold step() over frames in order."""

    def __init__(self, params_by_class=None, kalman_config: KalmanConfig = None,
                 frame_rate: float = DEFAULT_FRAME_RATE):
        self.params_by_class = params_by_class or {}
        self.kalman_config = kalman_config or KalmanConfig()
        self.dt = 1.0 / frame_rate
        self.live = []
        self.finished = []
        self._next_id = 1

    def _params(self, class_id: str) -> AssocParams:
        if class_id not in self.params_by_class:
            self.params_by_class[class_id] = default_assoc_params(class_id)
        return self.params_by_class[class_id]

    def step(self, frame_dets, frame_index: int):
        """Advance one frame: predict, associate per class, update, manage lifecycle."""
        predictions = []
        for lt in self.live:
            lt.state, box = kf_predict(lt.state, self.dt, self.kalman_config)
            predictions.append(box)

        class_ids = {lt.tracklet.class_id for lt in self.live}
        class_ids |= {d.class_id for d in frame_dets}
        matched_track = {}
        matched_det = set()
        for class_id in sorted(class_ids):
            params = self._params(class_id)
            t_idx = [i for i, lt in enumerate(self.live) if lt.tracklet.class_id == class_id]
            d_idx = [j for j, d in enumerate(frame_dets) if d.class_id == class_id]
            if t_idx:
                pairs = [(self.live[i].tracklet, predictions[i]) for i in t_idx]
                sub_dets = [frame_dets[j] for j in d_idx]
                sub_matches, _, _ = associate_two_stage(pairs, sub_dets, params)
                for ti, dj in sub_matches:
                    matched_track[t_idx[ti]] = d_idx[dj]
                    matched_det.add(d_idx[dj])

        survivors = []
        for i, lt in enumerate(self.live):
            params = self._params(lt.tracklet.class_id)
            if i in matched_track:
                det = frame_dets[matched_track[i]]
                lt.state = kf_update(lt.state, det, self.kalman_config)
                lt.tracklet.misses = 0
                lt.consecutive_hits += 1
                lt.tracklet.append(TrackEntry(frame_index, det.box, source="auto_mot"))
                if (lt.tracklet.status == "tentative"
                        and lt.consecutive_hits >= params.hits_to_confirm):
                    lt.tracklet.status = "confirmed"
                survivors.append(lt)
            else:
                lt.tracklet.misses += 1
                lt.consecutive_hits = 0
                # confirmation demands consecutive hits: an unconfirmed
                # track that misses is noise-born, not occluded
                if (lt.tracklet.status == "tentative"
                        or lt.tracklet.misses > params.max_misses):
                    self._kill(lt)
                else:
                    lt.tracklet.append(
                        TrackEntry(frame_index, predictions[i], source="auto_mot_predicted")
                    )
                    survivors.append(lt)
        self.live = survivors

        for j, det in enumerate(frame_dets):
            params = self._params(det.class_id)
            if j in matched_det or det.score < params.stage1_score:
                continue
            tracklet = Tracklet(self._next_id, det.class_id, status="tentative")
            self._next_id += 1
            tracklet.append(TrackEntry(frame_index, det.box, source="auto_mot"))
            self.live.append(
                _LiveTrack(tracklet=tracklet, state=kf_init(det, self.kalman_config),
                           consecutive_hits=1)
            )

    def _kill(self, lt: _LiveTrack):
        was_confirmed = lt.tracklet.status == "confirmed"
        # predicted coast entries at the tail were never confirmed; drop them
        entries = lt.tracklet.entries
        while entries and entries[-1].source == "auto_mot_predicted":
            entries.pop()
        lt.tracklet.status = "dead"
        if was_confirmed and entries:
            self.finished.append(lt)

    def result(self):
        """Confirmed tracklets, live and dead, ordered by id."""
        done = [lt.tracklet for lt in self.finished + self.live
                if lt.tracklet.status != "tentative" and lt.tracklet.entries]
        return sorted(done, key=lambda t: t.track_id)


def mot_step(tracker: MotTracker, frame_dets, frame_index: int):
    """Functional wrapper over MotTracker.step; returns the tracker."""
    tracker.step(frame_dets, frame_index)
    return tracker


def run_mot(seq, dets, params_by_class=None, kalman_config=None,
            frame_rate: float = None):
    """Track a whole sequence of pre-processed detections.

    seq may be a SceneSequence or a plain frame count; dets is a
    DetectionFrameSet (or list of per-frame lists) aligned with it.
    """
    if hasattr(seq, "frames"):
        n_frames = len(seq.frames)
        if frame_rate is None:
            frame_rate = getattr(seq, "frame_rate", DEFAULT_FRAME_RATE)
    else:
        n_frames = int(seq)
    if frame_rate is None:
        frame_rate = DEFAULT_FRAME_RATE
    frames = dets.frames if hasattr(dets, "frames") else dets
    if len(frames) != n_frames:
        raise ValueError(f"detections cover {len(frames)} frames, sequence has {n_frames}")
    tracker = MotTracker(params_by_class, kalman_config, frame_rate)
    for t, frame_dets in enumerate(frames):
        tracker.step(frame_dets, t)
    # a track mid-coast at sequence end keeps only detection-confirmed tail
    for lt in list(tracker.live):
        while lt.tracklet.entries and lt.tracklet.entries[-1].source == "auto_mot_predicted":
            lt.tracklet.entries.pop()
    return [t for t in tracker.result() if t.entries]
