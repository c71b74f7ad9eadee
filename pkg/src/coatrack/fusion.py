"""Multi-stream detection fusion.

Two stages, matching the two-stream layout: the X- and Y-motion detection
streams are merged into one motion stream first, then the motion stream is
fused into the appearance stream. Matching is per-box greedy overlap: every
box of the leading stream keeps itself unless some box of the other stream
overlaps it above the IoU threshold, in which case the pair is combined
(coordinate mean, or coordinate max for the appearance stage). Unmatched
boxes of the trailing stream are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .boxes import max_fuse, mean_fuse, iou
from .media_io import DetectionRecord, group_by_frame

Detection = DetectionRecord


@dataclass
class FusionConfig:
    iou_threshold: float = 0.3
    method: str = "mean"  # mean | max, applied at the appearance stage
    motion_primary: str = "mvx"  # stream whose boxes lead the motion merge

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.method not in ("mean", "max"):
            raise ValueError(f"method must be 'mean' or 'max', got {self.method!r}")
        if self.motion_primary not in ("mvx", "mvy"):
            raise ValueError(f"motion_primary must be 'mvx' or 'mvy', got {self.motion_primary!r}")


def _check_single_frame(*streams) -> None:
    frames = {d.frame for stream in streams for d in stream}
    if len(frames) > 1:
        raise ValueError(f"detections span multiple frames: {sorted(frames)}")


def _best_match(box, candidates) -> tuple[int, float]:
    # argmax IoU; strict > keeps the lowest candidate index on ties
    best_index, best_iou = -1, 0.0
    for i, cand in enumerate(candidates):
        value = iou(box, cand.box)
        if value > best_iou:
            best_index, best_iou = i, value
    return best_index, best_iou


def fuse_motion(
    mvx: list[Detection],
    mvy: list[Detection],
    cfg: FusionConfig,
) -> list[Detection]:
    """Merge the two motion-component streams of one frame.

    Each box of the leading stream (cfg.motion_primary, X by default) is
    averaged with the best-overlapping box of the other stream when their
    IoU exceeds the threshold, and passed through unchanged otherwise.
    """
    _check_single_frame(mvx, mvy)
    primary, secondary = (mvx, mvy) if cfg.motion_primary == "mvx" else (mvy, mvx)
    if not secondary:
        return list(primary)
    fused = []
    for det in primary:
        index, overlap = _best_match(det.box, secondary)
        if overlap > cfg.iou_threshold:
            other = secondary[index]
            fused.append(
                DetectionRecord(
                    frame=det.frame,
                    class_id=det.class_id,
                    score=(det.score + other.score) / 2.0,
                    box=mean_fuse(det.box, other.box),
                )
            )
        else:
            fused.append(det)
    return fused


def fuse_streams(
    appearance: list[Detection],
    motion: list[Detection],
    cfg: FusionConfig,
) -> list[Detection]:
    """Fuse the merged motion stream into the appearance stream of one frame.

    Output has exactly one detection per appearance box. A matched pair
    combines boxes by cfg.method (mean or coordinate-wise max), keeps the
    appearance class and averages the two scores; with no motion boxes the
    appearance stream passes through unchanged.
    """
    _check_single_frame(appearance, motion)
    if not motion:
        return list(appearance)
    combine = mean_fuse if cfg.method == "mean" else max_fuse
    fused = []
    for det in appearance:
        index, overlap = _best_match(det.box, motion)
        if overlap > cfg.iou_threshold:
            other = motion[index]
            fused.append(
                DetectionRecord(
                    frame=det.frame,
                    class_id=det.class_id,
                    score=(det.score + other.score) / 2.0,
                    box=combine(det.box, other.box),
                )
            )
        else:
            fused.append(det)
    return fused


def fuse_sequences(
    appearance: list[Detection],
    mvx: list[Detection],
    mvy: list[Detection],
    cfg: FusionConfig,
) -> list[Detection]:
    """Apply both fusion stages frame by frame over whole detection lists."""
    app_frames = group_by_frame(appearance)
    mvx_frames = group_by_frame(mvx)
    mvy_frames = group_by_frame(mvy)
    out = []
    for frame in sorted(set(app_frames) | set(mvx_frames) | set(mvy_frames)):
        motion = fuse_motion(mvx_frames.get(frame, []), mvy_frames.get(frame, []), cfg)
        out.extend(fuse_streams(app_frames.get(frame, []), motion, cfg))
    return out
