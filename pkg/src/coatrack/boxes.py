"""Axis-aligned bounding boxes: corner/center forms, IoU, and fusion primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    """Box in corner form (x_min, y_min, x_max, y_max), pixel coordinates, y down."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box corners out of order: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height

    def to_center(self) -> "CenterBox":
        return CenterBox(
            cx=(self.x_min + self.x_max) / 2.0,
            cy=(self.y_min + self.y_max) / 2.0,
            w=self.width,
            h=self.height,
        )

    def clip(self, frame_w: float, frame_h: float) -> "BoundingBox":
        """Clip to [0, frame_w] x [0, frame_h]."""
        return BoundingBox(
            min(max(self.x_min, 0.0), frame_w),
            min(max(self.y_min, 0.0), frame_h),
            min(max(self.x_max, 0.0), frame_w),
            min(max(self.y_max, 0.0), frame_h),
        )

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class CenterBox:
    """Box in center form (cx, cy, w, h); lossless view of a BoundingBox."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.cx, self.cy, self.w, self.h)):
            raise ValueError("center box values must be finite")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size: w={self.w}, h={self.h}")

    def to_corner(self) -> BoundingBox:
        return BoundingBox(
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union is degenerate."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def mean_fuse(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Coordinate-wise arithmetic mean of two boxes."""
    return BoundingBox(
        (a.x_min + b.x_min) / 2.0,
        (a.y_min + b.y_min) / 2.0,
        (a.x_max + b.x_max) / 2.0,
        (a.y_max + b.y_max) / 2.0,
    )


def max_fuse(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Coordinate-wise maximum of two boxes (max of each corner value, not max area)."""
    return BoundingBox(
        max(a.x_min, b.x_min),
        max(a.y_min, b.y_min),
        max(a.x_max, b.x_max),
        max(a.y_max, b.y_max),
    )
