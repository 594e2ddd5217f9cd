"""Synthetic scene generator and oracle detector tests."""

import math

import numpy as np
import pytest

from lidarlabel.geometry import Box7, PointCloud
from lidarlabel.mot import TrackEntry, Tracklet
from lidarlabel.refine import filter_tracks
from lidarlabel.synth import (
    CLASS_SIZES,
    AgentSpec,
    SceneConfig,
    SceneSequence,
    count_id_switches,
    generate_scene,
    synth_detector,
)
from oracles import fully_shadowed_oracle, point_in_box_oracle


def in_box_mask(pts, box, margin=0.0):
    """Containment computed with an explicit per-point rotation."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = pts[:, 0] - box.cx
    dy = pts[:, 1] - box.cy
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    lz = pts[:, 2] - box.cz
    return (
        (np.abs(lx) <= box.length / 2 + margin)
        & (np.abs(ly) <= box.width / 2 + margin)
        & (np.abs(lz) <= box.height / 2 + margin)
    )


def static_scene(x, y, class_id="vehicle", duration=30, density=800.0,
                 yaw=0.0, **kw):
    cfg = SceneConfig(
        duration=duration,
        agents=[AgentSpec(class_id, start=(x, y), heading=yaw)],
        density=density,
        ground_density=0.0,
        **kw,
    )
    return generate_scene(cfg)


class TestAgentSpec:
    def test_unknown_class_rejected(self):
        with pytest.raises(ValueError):
            AgentSpec("tank")

    def test_unknown_trajectory_rejected(self):
        with pytest.raises(ValueError):
            AgentSpec("vehicle", trajectory="teleport")

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            AgentSpec("vehicle", speed=-1.0)

    def test_default_size_from_class(self):
        assert AgentSpec("bus").size == CLASS_SIZES["bus"]
        assert AgentSpec("bus", size=(10.0, 2.5, 3.0)).size == (10.0, 2.5, 3.0)


class TestSceneConfig:
    def test_validation(self):
        ok = dict(duration=5, agents=[])
        SceneConfig(**ok)
        with pytest.raises(ValueError):
            SceneConfig(duration=0, agents=[])
        with pytest.raises(ValueError):
            SceneConfig(frame_rate=0.0, **ok)
        with pytest.raises(ValueError):
            SceneConfig(density=0.0, **ok)
        with pytest.raises(ValueError):
            SceneConfig(noise_sigma=-0.1, **ok)
        with pytest.raises(ValueError):
            SceneConfig(bounds=(10.0, -10.0, -10.0, 10.0), **ok)


class TestTrajectories:
    def test_line_positions_exact(self):
        cfg = SceneConfig(
            duration=10,
            agents=[AgentSpec("vehicle", start=(3.0, -20.0),
                              heading=math.pi / 2, speed=8.0)],
            ground_density=0.0,
        )
        seq = generate_scene(cfg)
        (track,) = seq.gt_tracks
        assert len(track) == 10
        for t, entry in enumerate(track.entries):
            assert entry.frame == t
            assert abs(entry.box.cx - 3.0) < 1e-9
            assert abs(entry.box.cy - (-20.0 + 0.8 * t)) < 1e-9
            assert abs(entry.box.yaw - math.pi / 2) < 1e-9
            assert abs(entry.box.cz - CLASS_SIZES["vehicle"][2] / 2) < 1e-9

    def test_stop_and_go_cadence(self):
        cfg = SceneConfig(
            duration=8,
            agents=[AgentSpec("vehicle", speed=4.0, trajectory="stop_and_go",
                              move_frames=2, stop_frames=3)],
            ground_density=0.0,
        )
        seq = generate_scene(cfg)
        xs = [e.box.cx for e in seq.gt_tracks[0].entries]
        want = [0.0, 0.4, 0.8, 0.8, 0.8, 0.8, 1.2, 1.6]
        assert np.allclose(xs, want, atol=1e-9)

    def test_arc_step_length_and_heading(self):
        cfg = SceneConfig(
            duration=40,
            agents=[AgentSpec("cyclist", start=(10.0, 0.0), heading=0.3,
                              speed=5.0, trajectory="arc", turn_rate=0.4)],
            ground_density=0.0,
        )
        seq = generate_scene(cfg)
        entries = seq.gt_tracks[0].entries
        dt = 1.0 / cfg.frame_rate
        for a, b in zip(entries, entries[1:]):
            step = math.hypot(b.box.cx - a.box.cx, b.box.cy - a.box.cy)
            assert abs(step - 5.0 * dt) < 1e-9
        for t, e in enumerate(entries):
            assert abs(e.box.yaw - (0.3 + 0.4 * dt * t)) < 1e-9

    def test_spawn_and_end_frames(self):
        cfg = SceneConfig(
            duration=20,
            agents=[AgentSpec("pedestrian", spawn_frame=4, end_frame=12,
                              speed=1.0)],
            ground_density=0.0,
        )
        seq = generate_scene(cfg)
        frames = [e.frame for e in seq.gt_tracks[0].entries]
        assert frames == list(range(4, 12))

    def test_sloped_ground_sets_box_height(self):
        plane = (0.05, 0.0, 1.0, 0.0)  # z = -0.05 x
        cfg = SceneConfig(
            duration=3,
            agents=[AgentSpec("vehicle", start=(10.0, 0.0))],
            ground_plane=plane,
            ground_density=0.0,
        )
        seq = generate_scene(cfg)
        h = CLASS_SIZES["vehicle"][2]
        assert abs(seq.gt_tracks[0].entries[0].box.cz - (-0.5 + h / 2)) < 1e-9


class TestGenerateScene:
    def test_noiseless_points_lie_on_surface(self):
        seq = static_scene(10.0, 2.0, yaw=0.4, duration=5)
        box = seq.gt_tracks[0].entries[0].box
        hl, hw, hh = box.length / 2, box.width / 2, box.height / 2
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        for frame in seq.frames:
            assert len(frame) > 50
            for p in frame.points:
                assert point_in_box_oracle(p[:3], box, margin=1e-9)
                lx = c * (p[0] - box.cx) + s * (p[1] - box.cy)
                ly = -s * (p[0] - box.cx) + c * (p[1] - box.cy)
                lz = p[2] - box.cz
                on_face = (
                    abs(abs(lx) - hl) < 1e-9
                    or abs(abs(ly) - hw) < 1e-9
                    or abs(lz - hh) < 1e-9
                )
                assert on_face

    def test_count_falls_with_range_squared(self):
        near = static_scene(10.0, 0.0, duration=30)
        far = static_scene(20.0, 0.0, duration=30)
        n_near = sum(len(f) for f in near.frames)
        n_far = sum(len(f) for f in far.frames)
        assert n_near > 1000
        ratio = n_far / n_near
        assert 0.20 <= ratio <= 0.30

    def test_deterministic_byte_identical(self):
        cfg = dict(duration=12, yaw=0.7, noise_sigma=0.03)
        a = static_scene(12.0, -4.0, **cfg)
        b = static_scene(12.0, -4.0, **cfg)
        for fa, fb in zip(a.frames, b.frames):
            assert fa.points.tobytes() == fb.points.tobytes()
        for ta, tb in zip(a.gt_tracks, b.gt_tracks):
            for ea, eb in zip(ta.entries, tb.entries):
                assert ea.box == eb.box

    def test_seed_changes_points(self):
        a = static_scene(12.0, -4.0, duration=3)
        b = static_scene(12.0, -4.0, duration=3, seed=1)
        assert a.frames[0].points.tobytes() != b.frames[0].points.tobytes()

    def test_fully_shadowed_agent_gets_zero_points(self):
        agents = [
            AgentSpec("bus", start=(10.0, 0.0)),
            AgentSpec("vehicle", start=(25.0, 0.0)),
        ]
        cfg = SceneConfig(duration=20, agents=agents, density=200.0,
                          ground_density=0.0)
        seq = generate_scene(cfg)
        bus = seq.gt_tracks[0].entries[0].box
        car = seq.gt_tracks[1].entries[0].box
        assert fully_shadowed_oracle(car, bus)
        car_pts = bus_pts = 0
        for frame in seq.frames:
            car_pts += int(in_box_mask(frame.points, car, 0.2).sum())
            bus_pts += int(in_box_mask(frame.points, bus, 0.2).sum())
        assert car_pts == 0
        assert bus_pts > 100

    def test_unshadowed_twin_keeps_points(self):
        cfg = SceneConfig(
            duration=20,
            agents=[AgentSpec("vehicle", start=(25.0, 0.0))],
            density=200.0,
            ground_density=0.0,
        )
        seq = generate_scene(cfg)
        car = seq.gt_tracks[0].entries[0].box
        total = sum(int(in_box_mask(f.points, car, 0.2).sum())
                    for f in seq.frames)
        assert total > 50

    def test_offset_agent_not_shadowed(self):
        agents = [
            AgentSpec("bus", start=(10.0, 0.0)),
            AgentSpec("vehicle", start=(25.0, 20.0)),
        ]
        cfg = SceneConfig(duration=10, agents=agents, density=200.0,
                          ground_density=0.0)
        seq = generate_scene(cfg)
        bus = seq.gt_tracks[0].entries[0].box
        car = seq.gt_tracks[1].entries[0].box
        assert not fully_shadowed_oracle(car, bus)
        total = sum(int(in_box_mask(f.points, car, 0.2).sum())
                    for f in seq.frames)
        assert total > 50

    def test_ground_points_on_plane_outside_footprints(self):
        plane = (0.05, 0.0, 1.0, 0.0)
        cfg = SceneConfig(
            duration=10,
            agents=[AgentSpec("vehicle", start=(8.0, 3.0), heading=0.5)],
            density=400.0,
            ground_density=0.05,
            ground_plane=plane,
            bounds=(-30.0, 30.0, -30.0, 30.0),
        )
        seq = generate_scene(cfg)
        box = seq.gt_tracks[0].entries[0].box
        n_ground = 0
        for frame in seq.frames:
            pts = frame.points
            ground = np.abs(pts[:, 2] - (-0.05 * pts[:, 0])) < 1e-9
            body = in_box_mask(pts, box, margin=1e-9)
            assert np.all(ground | body)
            flat = Box7(box.cx, box.cy, box.cz, box.length, box.width,
                        1000.0, box.yaw)
            assert not np.any(ground & ~body & in_box_mask(pts, flat))
            n_ground += int((ground & ~body).sum())
        # expected ground_density * area * frames, minus the tiny footprint
        expect = 0.05 * 60.0 * 60.0 * 10
        assert 0.8 * expect < n_ground < 1.2 * expect

    def test_gt_tracks_pass_refinement_filters(self):
        agents = [
            AgentSpec("vehicle", start=(-20.0, 4.0), speed=8.0),
            AgentSpec("pedestrian", start=(5.0, -10.0), heading=1.2,
                      speed=1.2),
            AgentSpec("cyclist", start=(12.0, 6.0), heading=-2.0, speed=5.0,
                      trajectory="arc", turn_rate=0.3),
            AgentSpec("bus", start=(-10.0, -15.0), heading=0.9, speed=6.0,
                      trajectory="stop_and_go"),
        ]
        cfg = SceneConfig(duration=60, agents=agents, density=100.0)
        seq = generate_scene(cfg)
        kept, flagged = filter_tracks(seq.gt_tracks)
        assert flagged == []
        assert len(kept) == 4

    def test_sequence_rejects_out_of_range_tracks(self):
        frames = [PointCloud(np.zeros((0, 4)), frame_index=t)
                  for t in range(3)]
        box = Box7(0, 0, 1, 4, 2, 1.5, 0)
        bad = Tracklet(1, "vehicle",
                       entries=[TrackEntry(5, box)], status="confirmed")
        with pytest.raises(ValueError):
            SceneSequence(frames=frames, gt_tracks=[bad])

    def test_noise_sigma_spreads_points(self):
        clean = static_scene(10.0, 0.0, duration=4)
        noisy = static_scene(10.0, 0.0, duration=4, noise_sigma=0.05)
        box = clean.gt_tracks[0].entries[0].box
        assert clean.frames[0].points.tobytes() != noisy.frames[0].points.tobytes()
        pts = np.vstack([f.points for f in noisy.frames])
        inside = in_box_mask(pts, box, margin=0.25)
        assert inside.mean() > 0.99


def empty_frames(n):
    return [PointCloud(np.zeros((0, 4)), frame_index=t) for t in range(n)]


def gt_sequence(n_frames, boxes_per_frame=1):
    """Cheap sequence with static gt tracks and no points."""
    tracks = []
    for k in range(boxes_per_frame):
        box = Box7(5.0 + 6.0 * k, 2.0, 0.8, 4.2, 1.9, 1.6, 0.3 * k)
        entries = [TrackEntry(t, box) for t in range(n_frames)]
        tracks.append(Tracklet(k + 1, "vehicle", entries=entries,
                               status="confirmed"))
    return SceneSequence(frames=empty_frames(n_frames), gt_tracks=tracks)


class TestSynthDetector:
    def test_perfect_detector_reproduces_gt(self):
        seq = gt_sequence(10, boxes_per_frame=3)
        dets = synth_detector(seq)
        assert dets.source == "synthetic"
        assert len(dets) == 10
        for t, frame in enumerate(dets.frames):
            assert len(frame) == 3
            for d, tr in zip(frame, seq.gt_tracks):
                gt = tr.entry_at(t).box
                assert d.class_id == tr.class_id
                assert d.score == 1.0
                assert (d.box.cx, d.box.cy, d.box.cz) == (gt.cx, gt.cy, gt.cz)
                assert (d.box.length, d.box.width, d.box.height, d.box.yaw) \
                    == (gt.length, gt.width, gt.height, gt.yaw)

    def test_full_dropout_yields_empty_frames(self):
        seq = gt_sequence(20, boxes_per_frame=2)
        dets = synth_detector(seq, dropout=1.0)
        assert all(len(f) == 0 for f in dets.frames)

    def test_dropout_fraction_matches_rate(self):
        seq = gt_sequence(10_000)
        dets = synth_detector(seq, dropout=0.05, seed=3)
        kept = sum(len(f) for f in dets.frames)
        frac = 1.0 - kept / 10_000
        assert abs(frac - 0.05) < 0.005

    def test_box_noise_statistics(self):
        seq = gt_sequence(1000, boxes_per_frame=3)
        dets = synth_detector(seq, box_noise=0.1, seed=5)
        dx = []
        for t, frame in enumerate(dets.frames):
            for d, tr in zip(frame, seq.gt_tracks):
                gt = tr.entry_at(t).box
                dx.extend([d.box.cx - gt.cx, d.box.cy - gt.cy,
                           d.box.cz - gt.cz])
                assert d.box.length == gt.length
                assert d.box.yaw == gt.yaw
        dx = np.asarray(dx)
        assert abs(dx.mean()) < 0.01
        assert 0.09 < dx.std() < 0.11

    def test_false_positive_rate_and_scores(self):
        seq = gt_sequence(500)
        dets = synth_detector(seq, fp_rate=2.0, tp_score=(0.7, 1.0), seed=9)
        xmin, xmax, ymin, ymax = seq.bounds
        n_fp = 0
        for t, frame in enumerate(dets.frames):
            gt = seq.gt_tracks[0].entry_at(t).box
            for d in frame:
                is_tp = (d.box.cx, d.box.cy) == (gt.cx, gt.cy)
                if is_tp:
                    assert 0.7 <= d.score <= 1.0
                else:
                    n_fp += 1
                    assert 0.1 <= d.score <= 0.45
                    assert xmin <= d.box.cx <= xmax
                    assert ymin <= d.box.cy <= ymax
                    assert d.class_id in CLASS_SIZES
        assert 1.8 < n_fp / 500 < 2.2

    def test_deterministic_per_seed(self):
        seq = gt_sequence(30, boxes_per_frame=2)
        a = synth_detector(seq, dropout=0.2, fp_rate=1.0, box_noise=0.1, seed=4)
        b = synth_detector(seq, dropout=0.2, fp_rate=1.0, box_noise=0.1, seed=4)
        c = synth_detector(seq, dropout=0.2, fp_rate=1.0, box_noise=0.1, seed=5)
        for fa, fb in zip(a.frames, b.frames):
            assert [(d.box, d.score) for d in fa] == [(d.box, d.score) for d in fb]
        assert any(
            [(d.box, d.score) for d in fa] != [(d.box, d.score) for d in fc]
            for fa, fc in zip(a.frames, c.frames)
        )

    def test_parameter_validation(self):
        seq = gt_sequence(2)
        with pytest.raises(ValueError):
            synth_detector(seq, dropout=1.5)
        with pytest.raises(ValueError):
            synth_detector(seq, dropout=-0.1)
        with pytest.raises(ValueError):
            synth_detector(seq, fp_rate=-1.0)
        with pytest.raises(ValueError):
            synth_detector(seq, box_noise=-0.5)


def track_from(track_id, class_id, frame_boxes):
    return Tracklet(track_id, class_id,
                    entries=[TrackEntry(t, b) for t, b in frame_boxes],
                    status="confirmed")


class TestCountIdSwitches:
    def boxes(self, n, x0=0.0):
        return [(t, Box7(x0 + 0.5 * t, 0, 0.8, 4.2, 1.9, 1.6, 0))
                for t in range(n)]

    def test_identical_tracks_no_switches(self):
        gt = [track_from(1, "vehicle", self.boxes(10))]
        pred = [track_from(7, "vehicle", self.boxes(10))]
        assert count_id_switches(pred, gt) == 0

    def test_split_track_counts_one(self):
        frames = self.boxes(10)
        gt = [track_from(1, "vehicle", frames)]
        pred = [track_from(10, "vehicle", frames[:5]),
                track_from(11, "vehicle", frames[5:])]
        assert count_id_switches(pred, gt) == 1

    def test_swapped_pair_counts_two(self):
        a = self.boxes(10, x0=0.0)
        b = self.boxes(10, x0=20.0)
        gt = [track_from(1, "vehicle", a), track_from(2, "vehicle", b)]
        pred = [
            track_from(10, "vehicle", a[:5] + b[5:]),
            track_from(11, "vehicle", b[:5] + a[5:]),
        ]
        assert count_id_switches(pred, gt) == 2

    def test_gap_with_same_id_is_not_a_switch(self):
        frames = self.boxes(10)
        gt = [track_from(1, "vehicle", frames)]
        pred = [track_from(5, "vehicle", frames[:4] + frames[6:])]
        assert count_id_switches(pred, gt) == 0

    def test_class_mismatch_never_matches(self):
        frames = self.boxes(6)
        gt = [track_from(1, "vehicle", frames)]
        pred = [track_from(2, "truck", frames)]
        assert count_id_switches(pred, gt) == 0
