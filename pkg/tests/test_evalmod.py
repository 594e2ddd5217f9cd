import math

import numpy as np
import pytest

from lidarlabel.evalmod import (
    AP_IOU_BY_CLASS,
    EvalReport,
    ap_report,
    average_precision,
    f1_report,
    match_frame,
)
from lidarlabel.geometry import Box7, Detection, iou_bev
from lidarlabel.mot import TrackEntry, Tracklet
from oracles import brute_force_assignment, interpolated_ap


def vbox(cx, cy=0.0, yaw=0.0, l=4.2, w=1.9, h=1.6, cz=0.8):
    return Box7(cx, cy, cz, l, w, h, yaw)


def track_of(boxes, class_id="vehicle", track_id=1, start=0):
    entries = [TrackEntry(start + i, b, source="manual")
               for i, b in enumerate(boxes)]
    return Tracklet(track_id, class_id, entries=entries, status="confirmed")


def det(box, score, class_id="vehicle"):
    return Detection(box=box, class_id=class_id, score=score)


class TestMatchFrame:
    def test_identical_sets_all_tp(self):
        boxes = [vbox(0.0), vbox(10.0), vbox(20.0)]
        pairs, fp, fn = match_frame(boxes, list(boxes), 0.3)
        assert pairs == [(0, 0), (1, 1), (2, 2)]
        assert fp == [] and fn == []

    def test_two_preds_one_gt(self):
        gt = vbox(0.0)
        close = vbox(0.3)
        closer = vbox(0.1)
        pairs, fp, fn = match_frame([close, closer], [gt], 0.3)
        assert len(pairs) == 1 and len(fp) == 1
        assert fn == []
        # the optimal pairing keeps the higher-IoU pred
        assert pairs[0] == (1, 0)

    def test_below_threshold_unmatched(self):
        pairs, fp, fn = match_frame([vbox(0.0)], [vbox(3.9)], 0.3)
        assert pairs == []
        assert fp == [0] and fn == [0]

    def test_threshold_validated(self):
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                match_frame([vbox(0.0)], [vbox(0.0)], bad)

    def test_empty_sides(self):
        pairs, fp, fn = match_frame([], [vbox(0.0)], 0.3)
        assert (pairs, fp, fn) == ([], [], [0])
        pairs, fp, fn = match_frame([vbox(0.0)], [], 0.3)
        assert (pairs, fp, fn) == ([], [0], [])

    def test_metric_3d_sees_vertical_offset(self):
        a = vbox(0.0, cz=0.8)
        b = vbox(0.0, cz=4.0)  # same footprint, disjoint in z
        pairs, _, _ = match_frame([a], [b], 0.3, metric="bev")
        assert len(pairs) == 1
        pairs, fp, fn = match_frame([a], [b], 0.3, metric="3d")
        assert pairs == [] and fp == [0] and fn == [0]

    def test_optimal_beats_greedy(self):
        # pred0 overlaps both gts, pred1 only gt0: optimal keeps 2 TPs
        gt0 = vbox(0.0)
        gt1 = vbox(2.8)
        pred0 = vbox(1.2)
        pred1 = vbox(0.1)
        assert iou_bev(pred0, gt0) > iou_bev(pred0, gt1) > 0.3
        assert iou_bev(pred1, gt0) > 0.3 > iou_bev(pred1, gt1)
        pairs, fp, fn = match_frame([pred0, pred1], [gt0, gt1], 0.3)
        assert len(pairs) == 2 and fp == [] and fn == []

    def test_matches_exhaustive_oracle_counts(self):
        rng = np.random.default_rng(70)
        for _ in range(40):
            n_p, n_g = rng.integers(1, 5), rng.integers(1, 5)
            preds = [vbox(float(rng.uniform(0, 10)), float(rng.uniform(0, 3)))
                     for _ in range(n_p)]
            gts = [vbox(float(rng.uniform(0, 10)), float(rng.uniform(0, 3)))
                   for _ in range(n_g)]
            pairs, fp, fn = match_frame(preds, gts, 0.3)
            cost = np.full((n_p, n_g), np.inf)
            for i, p in enumerate(preds):
                for j, g in enumerate(gts):
                    v = iou_bev(p, g)
                    if v >= 0.3:
                        cost[i, j] = 1.0 - v
            _, want = brute_force_assignment(cost)
            assert len(pairs) == len(want)
            gt_used = [j for _, j in pairs]
            assert len(set(gt_used)) == len(gt_used)
            assert len(pairs) + len(fp) == n_p
            assert len(pairs) + len(fn) == n_g


class TestF1Report:
    def test_perfect_annotations(self):
        gt = track_of([vbox(float(i)) for i in range(10)])
        pred = track_of([vbox(float(i)) for i in range(10)], track_id=2)
        report = f1_report([pred], [gt])
        m = report.per_class["vehicle"]
        assert m.f1 == 1.0 and m.precision == 1.0 and m.recall == 1.0
        assert report.mean_f1() == 1.0

    def test_empty_preds(self):
        gt = track_of([vbox(float(i)) for i in range(5)])
        report = f1_report([], [gt])
        m = report.per_class["vehicle"]
        assert m.recall == 0.0 and m.f1 == 0.0 and m.fn == 5

    def test_constructed_counts(self):
        # 10 gt frames; preds hit 8, miss 2, and add 2 strays: 8TP/2FP/2FN
        gt = track_of([vbox(0.0) for _ in range(10)])
        hit = track_of([vbox(0.0) for _ in range(8)], track_id=2)
        stray = track_of([vbox(50.0), vbox(50.0)], track_id=3, start=8)
        report = f1_report([hit, stray], [gt])
        m = report.per_class["vehicle"]
        assert (m.tp, m.fp, m.fn) == (8, 2, 2)
        assert m.precision == pytest.approx(0.8)
        assert m.recall == pytest.approx(0.8)
        assert m.f1 == pytest.approx(0.8)

    def test_swap_swaps_precision_recall(self):
        rng = np.random.default_rng(71)
        a = track_of([vbox(float(rng.uniform(0, 4))) for _ in range(12)])
        b = track_of([vbox(float(rng.uniform(0, 4))) for _ in range(7)],
                     track_id=2)
        fwd = f1_report([a], [b]).per_class["vehicle"]
        rev = f1_report([b], [a]).per_class["vehicle"]
        assert fwd.precision == pytest.approx(rev.recall)
        assert fwd.recall == pytest.approx(rev.precision)
        assert fwd.f1 == pytest.approx(rev.f1)

    def test_cross_class_never_matches(self):
        gt = track_of([vbox(0.0)], class_id="truck")
        pred = track_of([vbox(0.0)], class_id="vehicle", track_id=2)
        report = f1_report([pred], [gt])
        assert report.per_class["truck"].fn == 1
        assert report.per_class["vehicle"].fp == 1

    def test_report_serialization(self):
        gt = track_of([vbox(float(i)) for i in range(4)])
        report = f1_report([gt], [gt])
        d = report.to_dict()
        assert d["classes"]["vehicle"]["f1"] == 1.0
        assert "vehicle" in report.format_table()


class TestAveragePrecision:
    def test_perfect_detector(self):
        gts = [[vbox(0.0), vbox(10.0)], [vbox(5.0)]]
        dets = [[det(vbox(0.0), 0.9), det(vbox(10.0), 0.8)],
                [det(vbox(5.0), 0.95)]]
        assert average_precision(dets, gts, 0.7) == pytest.approx(1.0)

    def test_single_pair(self):
        assert average_precision([[det(vbox(0.0), 0.9)]], [[vbox(0.0)]],
                                 0.5) == pytest.approx(1.0)

    def test_toy_case_hand_computed(self):
        # 3 gts, 5 dets sorted by score: TP FP TP FP TP
        gts = [[vbox(0.0), vbox(10.0), vbox(20.0)]]
        dets = [[
            det(vbox(0.0), 0.95),
            det(vbox(40.0), 0.90),
            det(vbox(10.0), 0.85),
            det(vbox(50.0), 0.80),
            det(vbox(20.0), 0.70),
        ]]
        got = average_precision(dets, gts, 0.7)
        # hand-computed PR sweep: P at (1/3, 2/3, 1) recall = 1, 2/3, 3/5
        flags = [1, 0, 1, 0, 1]
        tp = np.cumsum(flags)
        recalls = tp / 3.0
        precisions = tp / np.arange(1, 6)
        assert got == pytest.approx(interpolated_ap(recalls, precisions))
        assert got == pytest.approx(451.0 / 600.0, abs=1e-12)

    def test_no_ground_truth_is_absent(self):
        assert average_precision([[det(vbox(0.0), 0.9)]], [[]], 0.5) is None

    def test_no_detections_zero(self):
        assert average_precision([[]], [[vbox(0.0)]], 0.5) == 0.0

    def test_monotone_score_invariance(self):
        rng = np.random.default_rng(72)
        gts = [[vbox(float(5 * i)) for i in range(4)] for _ in range(3)]
        dets = []
        for t in range(3):
            frame = []
            for i in range(4):
                if rng.uniform() < 0.7:
                    frame.append(det(vbox(5 * i + float(rng.uniform(-1, 1))),
                                     float(rng.uniform(0.2, 0.99))))
            frame.append(det(vbox(80.0), float(rng.uniform(0.2, 0.99))))
            dets.append(frame)
        base = average_precision(dets, gts, 0.3)
        squashed = [[det(d.box, d.score ** 2, d.class_id) for d in f]
                    for f in dets]
        assert average_precision(squashed, gts, 0.3) == pytest.approx(base)

    def test_tail_fp_never_raises_ap(self):
        gts = [[vbox(0.0), vbox(10.0)]]
        dets = [[det(vbox(0.0), 0.9), det(vbox(10.0), 0.6)]]
        base = average_precision(dets, gts, 0.7)
        worse = [dets[0] + [det(vbox(60.0), 0.1)]]
        assert average_precision(worse, gts, 0.7) <= base

    def test_leading_tp_never_lowers_ap(self):
        gts = [[vbox(0.0), vbox(10.0), vbox(20.0)]]
        dets = [[det(vbox(0.0), 0.8), det(vbox(70.0), 0.5)]]
        base = average_precision(dets, gts, 0.7)
        better = [dets[0] + [det(vbox(10.0), 0.95)]]
        assert average_precision(better, gts, 0.7) >= base

    def test_duplicate_detection_is_fp(self):
        gts = [[vbox(0.0)]]
        dets = [[det(vbox(0.0), 0.9), det(vbox(0.0), 0.8)]]
        got = average_precision(dets, gts, 0.7)
        # second det finds its gt claimed: P(1)=1, P(2)=0.5 at R=1
        assert got == pytest.approx(1.0)
        dets_rev = [[det(vbox(0.05), 0.9), det(vbox(0.0), 0.95)]]
        assert average_precision(dets_rev, gts, 0.7) == pytest.approx(1.0)


class TestApReport:
    def test_class_thresholds_and_absent(self):
        # same relative overlap: enough for pedestrian 0.5, not vehicle 0.7
        v_gt = vbox(0.0)
        v_det = det(vbox(0.891), 0.9)
        assert 0.5 < iou_bev(v_det.box, v_gt) < 0.7
        p_gt = Box7(10.0, 0.0, 0.9, 0.8, 0.8, 1.7, 0.0)
        p_det = det(Box7(10.17, 0.0, 0.9, 0.8, 0.8, 1.7, 0.0), 0.9,
                    class_id="pedestrian")
        assert 0.5 < iou_bev(p_det.box, p_gt) < 0.7
        report = ap_report([[v_det, p_det]],
                           [[("vehicle", v_gt), ("pedestrian", p_gt)]])
        assert report["vehicle"] == 0.0
        assert report["pedestrian"] == pytest.approx(1.0)
        assert AP_IOU_BY_CLASS["vehicle"] == 0.7

    def test_no_gt_class_is_none(self):
        report = ap_report([[det(vbox(0.0), 0.9, class_id="truck")]],
                           [[("vehicle", vbox(0.0))]])
        assert report["truck"] is None
        assert report["vehicle"] == 0.0
