import time

import numpy as np
import pytest

from coatrack.boxes import BoundingBox, iou
from coatrack.evaluate import (
    average_precision,
    evaluate_detections,
    evaluate_tracks,
    format_map_table,
    measure_speed,
    speed_report,
)
from coatrack.media_io import DetectionRecord, GroundTruthRecord, TrackRecord


def gt(x0, y0, x1, y1, frame=0, cls="a", target=0, visible=True):
    return GroundTruthRecord(frame=frame, class_id=cls, box=BoundingBox(x0, y0, x1, y1),
                             target_id=target, visible=visible)


def det(x0, y0, x1, y1, frame=0, cls="a", score=0.9):
    return DetectionRecord(frame=frame, class_id=cls, score=score,
                           box=BoundingBox(x0, y0, x1, y1))


def trk(x0, y0, x1, y1, frame=0, cls="a", target=0, fitness=1.0, occluded=False):
    return TrackRecord(frame=frame, class_id=cls, score=0.9, target_id=target,
                       box=BoundingBox(x0, y0, x1, y1), fitness=fitness, occluded=occluded)


def greedy_oracle(preds, gts, delta):
    """Independent restatement of the matching rule: score-ordered greedy,
    argmax IoU over unmatched same-frame ground truth."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, preds[i].frame, i))
    used = set()
    labels = {}
    for i in order:
        best_j, best_v = None, 0.0
        for j, g in enumerate(gts):
            if j in used or g.frame != preds[i].frame or g.class_id != preds[i].class_id:
                continue
            v = iou(preds[i].box, g.box)
            if v > best_v:
                best_j, best_v = j, v
        if best_j is not None and best_v >= delta:
            used.add(best_j)
            labels[i] = True
        else:
            labels[i] = False
    return labels


class TestAveragePrecision:
    def test_hand_built_two_gt_case(self):
        # 1 class, 2 gt boxes; one TP at score .9, one FP at score .8 -> AP 0.5
        gts = [gt(0, 0, 10, 10), gt(50, 50, 60, 60)]
        preds = [det(0, 0, 10, 10, score=0.9), det(100, 100, 110, 110, score=0.8)]
        report = evaluate_detections(preds, gts, delta=0.5)
        assert report.per_class_ap["a"] == pytest.approx(0.5)
        assert report.mean_ap == pytest.approx(0.5)
        assert report.counts["a"].tp == 1
        assert report.counts["a"].fp == 1
        assert report.counts["a"].fn == 1

    def test_perfect_detector(self):
        rng = np.random.default_rng(1)
        gts, preds = [], []
        for frame in range(10):
            for cls in ("a", "b"):
                x = float(rng.uniform(0, 200))
                gts.append(gt(x, 10, x + 20, 40, frame=frame, cls=cls))
                preds.append(det(x, 10, x + 20, 40, frame=frame, cls=cls,
                                 score=float(rng.uniform(0.5, 1.0))))
        report = evaluate_detections(preds, gts, delta=0.5)
        assert report.mean_ap == 1.0
        assert all(v == 1.0 for v in report.per_class_ap.values())

    def test_no_predictions_is_zero(self):
        report = evaluate_detections([], [gt(0, 0, 10, 10)], delta=0.2)
        assert report.mean_ap == 0.0
        assert report.counts["a"].fn == 1

    def test_score_rank_invariance(self):
        # AP depends on ranking only: any strictly monotone score transform
        rng = np.random.default_rng(2)
        gts = [gt(i * 30, 0, i * 30 + 20, 20, frame=0) for i in range(5)]
        preds = [det(i * 30 + int(rng.integers(0, 18)), 0, i * 30 + 20, 20, frame=0,
                     score=float(rng.uniform(0.1, 0.9))) for i in range(5)]
        base = evaluate_detections(preds, gts, delta=0.2).mean_ap
        squashed = [DetectionRecord(p.frame, p.class_id, p.score ** 3, p.box) for p in preds]
        assert evaluate_detections(squashed, gts, delta=0.2).mean_ap == pytest.approx(base)

    def test_lowest_score_fp_never_increases_ap(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            gts = [gt(i * 30, 0, i * 30 + 20, 20) for i in range(n)]
            preds = [det(i * 30 + int(rng.integers(0, 18)), 0, i * 30 + 20, 20,
                         score=float(rng.uniform(0.2, 1.0))) for i in range(n)]
            base = evaluate_detections(preds, gts, delta=0.3).mean_ap
            extra = preds + [det(500, 500, 520, 520, score=0.01)]
            assert evaluate_detections(extra, gts, delta=0.3).mean_ap <= base + 1e-12

    def test_greedy_semantics_match_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            n_gt = int(rng.integers(0, 6))
            n_pred = int(rng.integers(0, 6))
            gts, preds = [], []
            for _ in range(n_gt):
                x, y = rng.uniform(0, 60, 2)
                gts.append(gt(x, y, x + rng.uniform(5, 30), y + rng.uniform(5, 30)))
            for _ in range(n_pred):
                x, y = rng.uniform(0, 60, 2)
                preds.append(det(x, y, x + rng.uniform(5, 30), y + rng.uniform(5, 30),
                                 score=float(rng.uniform(0, 1))))
            report = evaluate_detections(preds, gts, delta=0.3)
            labels = greedy_oracle(preds, gts, 0.3)
            want_tp = sum(labels.values())
            if gts:
                assert report.counts["a"].tp == want_tp
                assert report.counts["a"].fp == n_pred - want_tp

    def test_class_without_gt_flagged_not_averaged(self):
        gts = [gt(0, 0, 10, 10, cls="a")]
        preds = [det(0, 0, 10, 10, cls="a", score=0.9),
                 det(0, 0, 10, 10, cls="ghost", score=0.9)]
        report = evaluate_detections(preds, gts, delta=0.5)
        assert report.classes_without_gt == ["ghost"]
        assert report.per_class_ap["ghost"] == 0.0
        assert report.mean_ap == 1.0  # only class "a" is averaged

    def test_envelope_interpolation(self):
        rec = np.array([0.2, 0.4, 0.4, 0.8])
        pre = np.array([1.0, 0.5, 0.4, 0.6])
        # envelope: precision at recall<=0.8 is max of later precisions
        assert average_precision(rec, pre) == pytest.approx(
            0.2 * 1.0 + 0.2 * 0.6 + 0.4 * 0.6)


class TestEvaluateTracks:
    def test_perfect_tracks(self):
        gts = [gt(i * 2, 0, i * 2 + 10, 10, frame=i) for i in range(20)]
        tracks = [trk(i * 2, 0, i * 2 + 10, 10, frame=i) for i in range(20)]
        report = evaluate_tracks(tracks, gts)
        assert report.frames_tracked == report.frames_total == 20
        assert report.mean_iou == 1.0
        assert report.reacquisition_latency == 0

    def test_frozen_track_decays_below_floor(self):
        gts = [gt(i * 5, 0, i * 5 + 10, 10, frame=i) for i in range(20)]
        tracks = [trk(0, 0, 10, 10, frame=i) for i in range(20)]
        report = evaluate_tracks(tracks, gts, iou_floor=0.5)
        assert report.frames_tracked < report.frames_total
        assert report.mean_iou < 0.5

    def test_three_frame_recovery_latency(self):
        gts, tracks = [], []
        for i in range(20):
            visible = not 5 <= i <= 9
            gts.append(gt(0, 0, 10, 10, frame=i, visible=visible))
            if i < 5 or i >= 13:
                tracks.append(trk(0, 0, 10, 10, frame=i))  # matches gt
            else:
                tracks.append(trk(200, 200, 210, 210, frame=i))  # lost
        report = evaluate_tracks(tracks, gts, iou_floor=0.5)
        assert report.reacquisition_latency == 3

    def test_missing_track_frames_count_as_zero(self):
        gts = [gt(0, 0, 10, 10, frame=i) for i in range(4)]
        tracks = [trk(0, 0, 10, 10, frame=0)]
        report = evaluate_tracks(tracks, gts)
        assert report.frames_total == 4
        assert report.frames_tracked == 1

    def test_unknown_target_rejected(self):
        gts = [gt(0, 0, 10, 10, frame=0, target=0)]
        tracks = [trk(0, 0, 10, 10, frame=0, target=7)]
        with pytest.raises(ValueError, match="target_id 7"):
            evaluate_tracks(tracks, gts)

    def test_invisible_frames_excluded(self):
        gts = [gt(0, 0, 10, 10, frame=i, visible=(i % 2 == 0)) for i in range(10)]
        tracks = [trk(0, 0, 10, 10, frame=i) for i in range(10)]
        report = evaluate_tracks(tracks, gts)
        assert report.frames_total == 5


class TestMeasureSpeed:
    def test_sleep_calibration(self):
        report = measure_speed({"sleep": lambda f: time.sleep(0.010)}, list(range(15)))
        assert report.stage_ms["sleep"] == pytest.approx(10.0, abs=4.0)
        assert report.frames_timed == 5

    def test_fps_is_harmonic_composition(self):
        report = speed_report({"a": [10.0] * 5, "b": [15.0] * 5}, frames_timed=5)
        assert report.fps == pytest.approx(1000.0 / 25.0)

    def test_too_few_frames_rejected(self):
        with pytest.raises(ValueError, match="frames"):
            measure_speed({"s": lambda f: None}, [])
        with pytest.raises(ValueError, match="frames"):
            measure_speed({"s": lambda f: None}, list(range(10)))


class TestFormatting:
    def test_table_shape(self):
        text = format_map_table([("mean-fuse", {0.2: 0.7212, 0.5: 0.6274}),
                                 ("appearance", {0.2: 0.7194})])
        lines = text.splitlines()
        assert "delta=0.2" in lines[0] and "delta=0.5" in lines[0]
        assert "mean-fuse" in lines[2] and "0.7212" in lines[2]
        assert "-" in lines[3].split()  # missing cell rendered as dash
