import numpy as np

from coatrack.boxes import BoundingBox
from coatrack.media_io import DetectionRecord
from coatrack.pipeline import clip_detections, init_trackers, run_tracking
from coatrack.synth import generate, linear_scenario
from coatrack.tracker import TrackerConfig


def det(x0, y0, x1, y1, frame=0, cls="walk", score=0.9):
    return DetectionRecord(frame=frame, class_id=cls, score=score,
                           box=BoundingBox(x0, y0, x1, y1))


class TestClipDetections:
    def test_out_of_frame_boxes_clipped(self):
        out = clip_detections([det(-5, -5, 10, 10), det(300, 200, 340, 250)], 320, 240)
        assert out[0].box == BoundingBox(0, 0, 10, 10)
        assert out[1].box == BoundingBox(300, 200, 320, 240)

    def test_inside_boxes_untouched(self):
        d = det(10, 10, 20, 20)
        assert clip_detections([d], 320, 240) == [d]


class TestInitTrackers:
    def test_degenerate_boxes_skipped(self, capsys):
        frames, _ = generate(linear_scenario(n_frames=1, seed=3))
        detections = [det(24, 94, 64, 144), det(5, 5, 6, 6)]  # second is 1 px^2
        trackers, records = init_trackers(frames[0], 0, detections, TrackerConfig())
        assert len(trackers) == 1
        assert len(records) == 1
        assert "degenerate" in capsys.readouterr().err

    def test_target_ids_enumerate_usable_boxes(self):
        frames, _ = generate(linear_scenario(n_frames=1, seed=3))
        detections = [det(24, 94, 64, 144), det(100, 20, 140, 70)]
        trackers, records = init_trackers(frames[0], 0, detections, TrackerConfig())
        assert [t.target_id for t in trackers] == [0, 1]
        assert all(r.fitness == 1.0 and not r.occluded for r in records)


class TestRunTracking:
    class _Frames:
        def __init__(self, frames):
            self._frames = frames
            self.height, self.width = frames[0].shape[:2]

        def __len__(self):
            return len(self._frames)

        def __getitem__(self, i):
            return self._frames[i]

    def test_no_detections_give_no_tracks(self):
        frames, _ = generate(linear_scenario(n_frames=5, seed=3))
        assert run_tracking(self._Frames(frames), [], TrackerConfig()) == []

    def test_initialization_waits_for_first_detection_frame(self):
        frames, gt = generate(linear_scenario(n_frames=12, seed=3))
        g = next(r for r in gt if r.frame == 4)
        detections = [DetectionRecord(4, g.class_id, 0.9, g.box)]
        records = run_tracking(self._Frames(frames), detections, TrackerConfig(rng_seed=1))
        assert min(r.frame for r in records) == 4
        assert {r.frame for r in records} == set(range(4, 12))

    def test_later_detections_ignored(self):
        # the tracker owns the target after initialization
        frames, gt = generate(linear_scenario(n_frames=8, seed=3))
        g0 = next(r for r in gt if r.frame == 0)
        detections = [DetectionRecord(0, g0.class_id, 0.9, g0.box),
                      det(200, 20, 240, 60, frame=3)]
        records = run_tracking(self._Frames(frames), detections, TrackerConfig(rng_seed=1))
        assert {r.target_id for r in records} == {0}

    def test_reported_boxes_inside_frame(self):
        frames, gt = generate(linear_scenario(n_frames=20, seed=3))
        g0 = next(r for r in gt if r.frame == 0)
        records = run_tracking(self._Frames(frames),
                               [DetectionRecord(0, g0.class_id, 0.9, g0.box)],
                               TrackerConfig(rng_seed=1))
        for r in records:
            assert 0 <= r.box.x_min <= r.box.x_max <= 320
            assert 0 <= r.box.y_min <= r.box.y_max <= 240
