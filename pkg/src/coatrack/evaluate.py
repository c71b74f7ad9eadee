"""Detection, tracking and throughput metrics.

Detection quality is frame-level average precision per class (greedy
score-ordered matching at an IoU threshold, area under the interpolated
precision-recall curve) averaged into mAP over the classes present in the
ground truth. Tracking quality is frames-tracked / mean IoU over visible
ground truth, plus the latency of recovering a target after it reappears.
Throughput is median wall-clock per pipeline stage after warm-up.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .boxes import iou
from .media_io import DetectionRecord, GroundTruthRecord, TrackRecord


@dataclass
class ClassCounts:
    tp: int
    fp: int
    fn: int


@dataclass
class DetEvalReport:
    delta: float  # IoU threshold for a true positive
    per_class_ap: dict[str, float]
    mean_ap: float  # over classes present in ground truth only
    counts: dict[str, ClassCounts]
    classes_without_gt: list[str] = field(default_factory=list)


@dataclass
class TrackEvalReport:
    frames_tracked: int
    frames_total: int
    mean_iou: float
    reacquisition_latency: int


@dataclass
class SpeedReport:
    stage_ms: dict[str, float]  # median per frame
    fps: float
    frames_timed: int


def average_precision(recalls: np.ndarray, precisions: np.ndarray) -> float:
    """Area under the monotone (all-points interpolated) PR curve."""
    mrec = np.concatenate(([0.0], recalls, [1.0]))
    mpre = np.concatenate(([0.0], precisions, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    changed = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]))


def evaluate_detections(
    predictions: Sequence[DetectionRecord],
    ground_truth: Sequence[GroundTruthRecord],
    delta: float = 0.2,
) -> DetEvalReport:
    """Frame-level AP per class and mAP at IoU threshold `delta`.

    Predictions are taken in descending score order (ties by frame then input
    order) and greedily matched to the not-yet-matched ground-truth box of
    the same class and frame with maximal IoU; a match needs IoU >= delta.
    Classes predicted but absent from the ground truth get AP 0 and are
    flagged, not averaged.
    """
    gt_classes = sorted({g.class_id for g in ground_truth})
    pred_classes = sorted({p.class_id for p in predictions})
    per_class_ap: dict[str, float] = {}
    counts: dict[str, ClassCounts] = {}
    classes_without_gt = [c for c in pred_classes if c not in gt_classes]

    for cls in gt_classes:
        cls_gt: dict[int, list[GroundTruthRecord]] = {}
        for g in ground_truth:
            if g.class_id == cls:
                cls_gt.setdefault(g.frame, []).append(g)
        n_gt = sum(len(v) for v in cls_gt.values())
        cls_pred = [p for p in predictions if p.class_id == cls]
        order = sorted(range(len(cls_pred)),
                       key=lambda i: (-cls_pred[i].score, cls_pred[i].frame, i))
        matched: dict[int, list[bool]] = {f: [False] * len(v) for f, v in cls_gt.items()}
        tp = np.zeros(len(order))
        fp = np.zeros(len(order))
        for rank, i in enumerate(order):
            pred = cls_pred[i]
            best_j, best_iou = -1, 0.0
            for j, g in enumerate(cls_gt.get(pred.frame, [])):
                if matched[pred.frame][j]:
                    continue
                value = iou(pred.box, g.box)
                if value > best_iou:
                    best_j, best_iou = j, value
            if best_j >= 0 and best_iou >= delta:
                matched[pred.frame][best_j] = True
                tp[rank] = 1
            else:
                fp[rank] = 1
        tp_cum = np.cumsum(tp)
        fp_cum = np.cumsum(fp)
        if n_gt == 0 or len(order) == 0:
            ap = 0.0
        else:
            recalls = tp_cum / n_gt
            precisions = tp_cum / np.maximum(tp_cum + fp_cum, 1e-12)
            ap = average_precision(recalls, precisions)
        n_tp = int(tp_cum[-1]) if len(order) else 0
        per_class_ap[cls] = ap
        counts[cls] = ClassCounts(tp=n_tp, fp=len(order) - n_tp, fn=n_gt - n_tp)

    for cls in classes_without_gt:
        n_pred = sum(1 for p in predictions if p.class_id == cls)
        per_class_ap[cls] = 0.0
        counts[cls] = ClassCounts(tp=0, fp=n_pred, fn=0)

    mean_ap = float(np.mean([per_class_ap[c] for c in gt_classes])) if gt_classes else 0.0
    return DetEvalReport(
        delta=delta,
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        counts=counts,
        classes_without_gt=classes_without_gt,
    )


def evaluate_tracks(
    tracks: Sequence[TrackRecord],
    ground_truth: Sequence[GroundTruthRecord],
    iou_floor: float = 0.5,
) -> TrackEvalReport:
    """Tracking success over the frames where the ground truth is visible.

    frames_tracked counts visible (target, frame) pairs with track IoU at or
    above `iou_floor`; mean_iou averages over the same pairs (a missing track
    record counts as IoU 0). reacquisition_latency is the worst number of
    frames, over all reappearance episodes, between the ground truth becoming
    visible again and the track recovering to the floor.
    """
    gt_by_target: dict[int, dict[int, GroundTruthRecord]] = {}
    for g in ground_truth:
        gt_by_target.setdefault(g.target_id, {})[g.frame] = g
    track_by_target: dict[int, dict[int, TrackRecord]] = {}
    for t in tracks:
        if t.target_id not in gt_by_target:
            raise ValueError(f"track target_id {t.target_id} not present in ground truth")
        track_by_target.setdefault(t.target_id, {})[t.frame] = t

    frames_tracked = 0
    frames_total = 0
    ious: list[float] = []
    worst_latency = 0
    for target_id, gt_frames in sorted(gt_by_target.items()):
        trk_frames = track_by_target.get(target_id, {})
        per_frame: dict[int, float] = {}
        for frame, g in sorted(gt_frames.items()):
            if not g.visible:
                continue
            t = trk_frames.get(frame)
            per_frame[frame] = iou(t.box, g.box) if t is not None else 0.0
        frames_total += len(per_frame)
        frames_tracked += sum(1 for v in per_frame.values() if v >= iou_floor)
        ious.extend(per_frame.values())

        # reappearance episodes: visible frame preceded by an invisible one
        ordered = sorted(gt_frames)
        for prev, frame in zip(ordered, ordered[1:]):
            if gt_frames[frame].visible and not gt_frames[prev].visible:
                run = []
                f = frame
                while f in gt_frames and gt_frames[f].visible:
                    run.append(f)
                    f += 1
                recovered = [r for r in run if per_frame.get(r, 0.0) >= iou_floor]
                latency = (recovered[0] - frame) if recovered else len(run)
                worst_latency = max(worst_latency, latency)

    mean_iou = float(np.mean(ious)) if ious else 0.0
    return TrackEvalReport(
        frames_tracked=frames_tracked,
        frames_total=frames_total,
        mean_iou=mean_iou,
        reacquisition_latency=worst_latency,
    )


def measure_speed(
    stages: Mapping[str, Callable],
    frames: Sequence,
    warmup: int = 10,
) -> SpeedReport:
    """Run each stage on every frame and report median wall-clock per stage.

    The first `warmup` frames run but are excluded from the medians; fps is
    1000 over the summed per-stage medians.
    """
    if len(frames) <= warmup:
        raise ValueError(f"need more than {warmup} frames to measure, got {len(frames)}")
    samples: dict[str, list[float]] = {name: [] for name in stages}
    for i, frame in enumerate(frames):
        for name, fn in stages.items():
            start = time.perf_counter()
            fn(frame)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            if i >= warmup:
                samples[name].append(elapsed_ms)
    return speed_report(samples, frames_timed=len(frames) - warmup)


def speed_report(samples: Mapping[str, Iterable[float]], frames_timed: int) -> SpeedReport:
    """Fold raw per-frame stage timings (ms) into a SpeedReport."""
    stage_ms = {name: float(np.median(list(times))) for name, times in samples.items()}
    total = sum(stage_ms.values())
    fps = 1000.0 / total if total > 0 else float("inf")
    return SpeedReport(stage_ms=stage_ms, fps=fps, frames_timed=frames_timed)


def format_map_table(rows: Sequence[tuple[str, Mapping[float, float]]]) -> str:
    """Aligned text table: one row per method, one column per IoU threshold."""
    deltas = sorted({d for _, cells in rows for d in cells})
    header = ["method"] + [f"delta={d:g}" for d in deltas]
    body = [[label] + [f"{cells[d]:.4f}" if d in cells else "-" for d in deltas]
            for label, cells in rows]
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*["-" * w for w in widths])]
    lines += [fmt.format(*row) for row in body]
    return "\n".join(lines)
