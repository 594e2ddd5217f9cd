"""Annotation-quality and detection-quality metrics.

Per-class precision/recall/F1 at a fixed IoU threshold for comparing
annotation sets, and 40-recall-point interpolated average precision for
scoring raw detections, in BEV or full 3D overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lidarlabel.geometry import iou_3d, iou_bev
from lidarlabel.mot import hungarian

DEFAULT_F1_IOU = 0.3

AP_IOU_BY_CLASS = {
    "vehicle": 0.7,
    "pedestrian": 0.5,
    "cyclist": 0.5,
    "motorcycle": 0.5,
    "bus": 0.7,
    "truck": 0.7,
}


def _iou_fn(metric: str):
    if metric == "bev":
        return iou_bev
    if metric == "3d":
        return iou_3d
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class ClassMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ap_3d: float = None
    ap_bev: float = None

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class EvalReport:
    per_class: dict = field(default_factory=dict)
    iou_threshold: float = DEFAULT_F1_IOU

    def mean_f1(self) -> float:
        scored = [m.f1 for m in self.per_class.values() if m.tp + m.fn > 0]
        return sum(scored) / len(scored) if scored else 0.0

    def to_dict(self) -> dict:
        out = {"iou_threshold": self.iou_threshold, "mean_f1": self.mean_f1(),
               "classes": {}}
        for cls, m in sorted(self.per_class.items()):
            out["classes"][cls] = {
                "precision": m.precision, "recall": m.recall, "f1": m.f1,
                "tp": m.tp, "fp": m.fp, "fn": m.fn,
                "ap_3d": m.ap_3d, "ap_bev": m.ap_bev,
            }
        return out

    def format_table(self) -> str:
        header = (f"{'class':<12} {'prec':>6} {'recall':>6} {'f1':>6} "
                  f"{'ap_3d':>6} {'ap_bev':>6} {'tp':>5} {'fp':>5} {'fn':>5}")
        lines = [header, "-" * len(header)]
        for cls, m in sorted(self.per_class.items()):
            ap3 = f"{m.ap_3d:.3f}" if m.ap_3d is not None else "-"
            apb = f"{m.ap_bev:.3f}" if m.ap_bev is not None else "-"
            lines.append(f"{cls:<12} {m.precision:6.3f} {m.recall:6.3f} "
                         f"{m.f1:6.3f} {ap3:>6} {apb:>6} "
                         f"{m.tp:5d} {m.fp:5d} {m.fn:5d}")
        lines.append(f"mean F1 {self.mean_f1():.3f} at IoU {self.iou_threshold}")
        return "\n".join(lines)


def match_frame(preds, gts, iou_threshold: float = DEFAULT_F1_IOU,
                metric: str = "bev"):
    """Optimally match one frame's boxes: (tp pairs, fp idx, fn idx).

    Hungarian assignment on negative IoU with pairs under the threshold
    forbidden, so each ground truth is used at most once and the number of
    true positives is maximal.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1)")
    iou = _iou_fn(metric)
    if not preds or not gts:
        return [], list(range(len(preds))), list(range(len(gts)))
    cost = np.full((len(preds), len(gts)), np.inf)
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            v = iou(p, g)
            if v >= iou_threshold:
                cost[i, j] = 1.0 - v
    matches = hungarian(cost)
    pairs = sorted(matches.items())
    fp = [i for i in range(len(preds)) if i not in matches]
    matched_gts = set(matches.values())
    fn = [j for j in range(len(gts)) if j not in matched_gts]
    return pairs, fp, fn


def _boxes_by_class_frame(tracks):
    out = {}
    for tr in tracks:
        for e in tr.entries:
            out.setdefault(tr.class_id, {}).setdefault(e.frame, []).append(e.box)
    return out


def f1_report(pred_tracks, gt_tracks, iou_threshold: float = DEFAULT_F1_IOU,
              metric: str = "bev") -> EvalReport:
    """Aggregate per-frame matching into per-class precision/recall/F1."""
    preds = _boxes_by_class_frame(pred_tracks)
    gts = _boxes_by_class_frame(gt_tracks)
    report = EvalReport(iou_threshold=iou_threshold)
    for cls in sorted(set(preds) | set(gts)):
        m = ClassMetrics()
        p_frames = preds.get(cls, {})
        g_frames = gts.get(cls, {})
        for frame in sorted(set(p_frames) | set(g_frames)):
            pairs, fp, fn = match_frame(p_frames.get(frame, []),
                                        g_frames.get(frame, []),
                                        iou_threshold, metric)
            m.tp += len(pairs)
            m.fp += len(fp)
            m.fn += len(fn)
        report.per_class[cls] = m
    return report


def average_precision(det_frames, gt_frames, iou_threshold: float,
                      metric: str = "bev"):
    """Interpolated AP over aligned per-frame detections and truth boxes.

    Detections are swept in descending score order; each claims the
    highest-IoU unclaimed ground truth in its frame at or above the
    threshold. AP averages the best precision at or beyond each of 40
    evenly spaced recall points. Returns None when there is no ground
    truth to recall.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1)")
    iou = _iou_fn(metric)
    n_gt = sum(len(g) for g in gt_frames)
    if n_gt == 0:
        return None
    ranked = []
    for t, dets in enumerate(det_frames):
        for d in dets:
            ranked.append((-d.score, t, d))
    ranked.sort(key=lambda r: r[0])

    claimed = [set() for _ in gt_frames]
    hits = []
    for _, t, det in ranked:
        best_j, best_v = None, iou_threshold
        for j, gt in enumerate(gt_frames[t]):
            if j in claimed[t]:
                continue
            v = iou(det.box, gt)
            if v >= best_v:
                best_j, best_v = j, v
        if best_j is not None:
            claimed[t].add(best_j)
            hits.append(1)
        else:
            hits.append(0)
    if not hits:
        return 0.0

    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(hits) + 1)
    recall = tp / n_gt
    total = 0.0
    for k in range(1, 41):
        r = k / 40.0
        mask = recall >= r - 1e-12
        total += float(precision[mask].max()) if mask.any() else 0.0
    return total / 40.0


def ap_report(det_frames, gt_frames, metric: str = "bev",
              thresholds=None) -> dict:
    """Per-class AP at the class defaults; absent classes map to None.

    det_frames holds per-frame Detection lists (mixed classes), gt_frames
    per-frame (class_id, Box7) pair lists.
    """
    thresholds = thresholds or AP_IOU_BY_CLASS
    classes = set()
    for dets in det_frames:
        classes.update(d.class_id for d in dets)
    for gts in gt_frames:
        classes.update(cls for cls, _ in gts)
    out = {}
    for cls in sorted(classes):
        dets_cls = [[d for d in dets if d.class_id == cls] for dets in det_frames]
        gts_cls = [[box for c, box in gts if c == cls] for gts in gt_frames]
        thr = thresholds.get(cls, 0.5)
        out[cls] = average_precision(dets_cls, gts_cls, thr, metric)
    return out
