"""Frame-loop orchestration: ingest detections, fuse streams, drive trackers.

Detections come from files (one JSON Lines stream each for appearance,
X-motion and Y-motion), standing in for the detector networks. Per frame the
motion streams are merged, the result is fused into the appearance stream,
and the fused boxes of the first non-empty frame initialize one COA tracker
per box, which then run to the end of the sequence. Stage wall-clock times
are collected for the throughput report.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

from .evaluate import SpeedReport, speed_report
from .fusion import FusionConfig, fuse_motion, fuse_streams
from .media_io import DetectionRecord, FrameSequence, TrackRecord, group_by_frame
from .tracker import CoaTracker, TrackerConfig

SPEED_WARMUP_FRAMES = 10
MIN_TRACK_AREA = 4.0  # px^2; fused boxes smaller than this seed no tracker


@dataclass
class PipelineResult:
    fused: list[DetectionRecord] = field(default_factory=list)
    tracks: list[TrackRecord] = field(default_factory=list)
    speed: SpeedReport | None = None


def clip_detections(
    detections: list[DetectionRecord], frame_w: int, frame_h: int
) -> list[DetectionRecord]:
    """Clip detection boxes to the frame bounds (output emission rule)."""
    out = []
    for d in detections:
        clipped = d.box.clip(float(frame_w), float(frame_h))
        out.append(d if clipped == d.box else
                   DetectionRecord(d.frame, d.class_id, d.score, clipped))
    return out


def init_trackers(
    frame,
    frame_index: int,
    detections: list[DetectionRecord],
    config: TrackerConfig,
) -> tuple[list[CoaTracker], list[TrackRecord]]:
    """One tracker per usable detection box; also returns the init records."""
    h, w = frame.shape[:2]
    trackers: list[CoaTracker] = []
    records: list[TrackRecord] = []
    for det in detections:
        box = det.box.clip(float(w), float(h))
        if box.area() < MIN_TRACK_AREA:
            print(f"warning: skipping degenerate detection box {det.box} "
                  f"on frame {frame_index}", file=sys.stderr)
            continue
        tracker = CoaTracker(
            frame, box, config,
            target_id=len(trackers), class_id=det.class_id, score=det.score,
        )
        trackers.append(tracker)
        records.append(
            TrackRecord(frame=frame_index, class_id=det.class_id, score=det.score,
                        box=box, target_id=tracker.target_id, fitness=1.0,
                        occluded=False)
        )
    return trackers, records


def run_tracking(
    frames: FrameSequence,
    detections: list[DetectionRecord],
    config: TrackerConfig,
) -> list[TrackRecord]:
    """Initialize trackers from the first frame holding detections, then track
    every subsequent frame. Detections on later frames are ignored: the
    trackers, not the detector, own the targets from initialization on."""
    by_frame = group_by_frame(detections)
    start = min(by_frame) if by_frame else None
    trackers: list[CoaTracker] = []
    records: list[TrackRecord] = []
    for t in range(len(frames)):
        if not trackers and t != start:
            continue
        frame = frames[t]
        if not trackers:
            trackers, init_records = init_trackers(frame, t, by_frame[t], config)
            records.extend(init_records)
            continue
        for trk in trackers:
            box, fitness = trk.track(frame)
            records.append(
                TrackRecord(frame=t, class_id=trk.class_id, score=trk.score,
                            box=box.clip(float(frames.width), float(frames.height)),
                            target_id=trk.target_id, fitness=fitness,
                            occluded=trk.occluded)
            )
    return records


def run_pipeline(
    frames: FrameSequence,
    appearance: list[DetectionRecord],
    mvx: list[DetectionRecord],
    mvy: list[DetectionRecord],
    fusion_config: FusionConfig,
    tracker_config: TrackerConfig,
) -> PipelineResult:
    """Full per-frame loop; deterministic for fixed inputs and seeds."""
    app_frames = group_by_frame(appearance)
    mvx_frames = group_by_frame(mvx)
    mvy_frames = group_by_frame(mvy)
    result = PipelineResult()
    trackers: list[CoaTracker] = []
    times: dict[str, list[float]] = {"read": [], "fuse": [], "track": []}

    for t in range(len(frames)):
        start = time.perf_counter()
        frame = frames[t]
        t_read = time.perf_counter()

        motion = fuse_motion(mvx_frames.get(t, []), mvy_frames.get(t, []), fusion_config)
        fused = fuse_streams(app_frames.get(t, []), motion, fusion_config)
        fused = clip_detections(fused, frames.width, frames.height)
        result.fused.extend(fused)
        t_fuse = time.perf_counter()

        if not trackers:
            if fused:
                trackers, init_records = init_trackers(frame, t, fused, tracker_config)
                result.tracks.extend(init_records)
        else:
            for trk in trackers:
                box, fitness = trk.track(frame)
                result.tracks.append(
                    TrackRecord(frame=t, class_id=trk.class_id, score=trk.score,
                                box=box.clip(float(frames.width), float(frames.height)),
                                target_id=trk.target_id, fitness=fitness,
                                occluded=trk.occluded)
                )
        t_track = time.perf_counter()

        times["read"].append((t_read - start) * 1000.0)
        times["fuse"].append((t_fuse - t_read) * 1000.0)
        times["track"].append((t_track - t_fuse) * 1000.0)

    warmup = SPEED_WARMUP_FRAMES if len(frames) > SPEED_WARMUP_FRAMES else 0
    result.speed = speed_report(
        {name: series[warmup:] for name, series in times.items()},
        frames_timed=len(frames) - warmup,
    )
    return result
