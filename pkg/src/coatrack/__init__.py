"""Coyote-optimization action localization and tracking toolkit."""

from .boxes import BoundingBox, CenterBox, iou, max_fuse, mean_fuse
from .coa import CoaConfig, CoaResult, Coyote, Pack, cultural_tendency, greedy_accept
from .coa import initialize_population, run as run_coa, update_coyote
from .fusion import Detection, FusionConfig, fuse_motion, fuse_sequences, fuse_streams
from .media_io import (
    DetectionRecord,
    FrameSequence,
    GroundTruthRecord,
    MediaFormatError,
    TrackRecord,
)
from .motion import MotionField, estimate as estimate_motion, render as render_motion
from .tracker import CoaTracker, TrackerConfig, track_multi

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CenterBox",
    "CoaConfig",
    "CoaResult",
    "CoaTracker",
    "Coyote",
    "Detection",
    "DetectionRecord",
    "FrameSequence",
    "FusionConfig",
    "GroundTruthRecord",
    "MediaFormatError",
    "MotionField",
    "Pack",
    "TrackRecord",
    "TrackerConfig",
    "cultural_tendency",
    "estimate_motion",
    "fuse_motion",
    "fuse_sequences",
    "fuse_streams",
    "greedy_accept",
    "initialize_population",
    "iou",
    "max_fuse",
    "mean_fuse",
    "render_motion",
    "run_coa",
    "track_multi",
    "update_coyote",
]
