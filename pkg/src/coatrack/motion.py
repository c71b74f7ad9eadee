"""Block-matching motion estimation over frame pairs.

Stands in for the motion vectors a video decoder would hand over for free:
each block of the current frame is matched against the previous frame by
exhaustive search, minimizing the sum of absolute differences. The resulting
per-block (dx, dy) field can be rendered into detector-style grayscale images
(one per component) or exchanged through sidecar files (see media_io).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MotionField:
    """Per-block displacement field; mvx/mvy are (grid_h, grid_w) float arrays.

    (dx, dy) is the motion of block content from the previous frame to the
    current one: the block at (x, y) matches the previous frame at
    (x - dx, y - dy).
    """

    block_size: int
    grid_w: int
    grid_h: int
    mvx: np.ndarray
    mvy: np.ndarray
    search_radius: int


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    """Integer BT.601 luminance for RGB frames; grayscale passes through."""
    if frame.ndim == 2:
        return frame
    r = frame[:, :, 0].astype(np.int32)
    g = frame[:, :, 1].astype(np.int32)
    b = frame[:, :, 2].astype(np.int32)
    return ((77 * r + 150 * g + 29 * b + 128) >> 8).astype(np.uint8)


def estimate(
    prev: np.ndarray,
    curr: np.ndarray,
    block_size: int = 16,
    search_radius: int = 8,
) -> MotionField:
    """Exhaustive-search block matching of `curr` against `prev`.

    Ties in SAD are broken by smallest |dx| + |dy|, then smallest dy, then
    smallest dx, so a static frame pair yields the exact zero field. Edge
    blocks only consider displacements whose source rectangle stays inside
    the previous frame; blocks with no valid displacement report (0, 0).
    """
    if prev.shape[:2] != curr.shape[:2]:
        raise ValueError(f"frame size mismatch: {prev.shape[:2]} vs {curr.shape[:2]}")
    if block_size < 1 or search_radius < 0:
        raise ValueError("block_size must be >= 1 and search_radius >= 0")
    prev = to_grayscale(prev).astype(np.int32)
    curr = to_grayscale(curr).astype(np.int32)
    h, w = curr.shape
    grid_h = -(-h // block_size)
    grid_w = -(-w // block_size)

    x0 = np.arange(grid_w) * block_size
    y0 = np.arange(grid_h) * block_size
    x1 = np.minimum(x0 + block_size, w)
    y1 = np.minimum(y0 + block_size, h)

    best_cost = np.full((grid_h, grid_w), np.inf)
    best_dx = np.zeros((grid_h, grid_w), dtype=np.int32)
    best_dy = np.zeros((grid_h, grid_w), dtype=np.int32)

    span = range(-search_radius, search_radius + 1)
    candidates = sorted(
        ((dx, dy) for dx in span for dy in span),
        key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]),
    )
    diff = np.zeros((h, w), dtype=np.int32)
    for dx, dy in candidates:
        cs_y = slice(max(0, dy), h + min(0, dy))
        cs_x = slice(max(0, dx), w + min(0, dx))
        ps_y = slice(cs_y.start - dy, cs_y.stop - dy)
        ps_x = slice(cs_x.start - dx, cs_x.stop - dx)
        diff[:] = 0
        np.abs(curr[cs_y, cs_x] - prev[ps_y, ps_x], out=diff[cs_y, cs_x])
        rows = np.add.reduceat(diff, y0, axis=0)
        cost = np.add.reduceat(rows, x0, axis=1).astype(float)
        valid = ((y0 - dy >= 0) & (y1 - dy <= h))[:, None] & ((x0 - dx >= 0) & (x1 - dx <= w))
        cost[~valid] = np.inf
        better = cost < best_cost  # strict: earlier candidates win SAD ties
        best_cost[better] = cost[better]
        best_dx[better] = dx
        best_dy[better] = dy

    return MotionField(
        block_size=block_size,
        grid_w=grid_w,
        grid_h=grid_h,
        mvx=best_dx.astype(float),
        mvy=best_dy.astype(float),
        search_radius=search_radius,
    )


def render(field: MotionField, frame_dims: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Draw the X and Y components as block-constant grayscale images.

    Zero maps to 128 and +/- search_radius to 255/1, i.e. value
    128 + component * 127 / search_radius rounded and clipped to [0, 255].
    """
    w, h = frame_dims
    scale = 127.0 / field.search_radius if field.search_radius > 0 else 0.0
    images = []
    for comp in (field.mvx, field.mvy):
        levels = np.clip(np.rint(128.0 + comp * scale), 0, 255).astype(np.uint8)
        full = np.repeat(np.repeat(levels, field.block_size, axis=0), field.block_size, axis=1)
        images.append(full[:h, :w])
    return images[0], images[1]


def field_to_records(field: MotionField, frame: int) -> list[tuple[int, int, float, float]]:
    """Flatten a field into sidecar tuples (bx, by, dx, dy) for `frame`."""
    records = []
    for by in range(field.grid_h):
        for bx in range(field.grid_w):
            records.append((bx, by, float(field.mvx[by, bx]), float(field.mvy[by, bx])))
    return records


def field_from_records(
    records: list[tuple[int, int, float, float]],
    frame_dims: tuple[int, int],
    block_size: int = 16,
    search_radius: int = 8,
) -> MotionField:
    """Rebuild a field from sidecar tuples; unlisted blocks default to zero."""
    w, h = frame_dims
    grid_h = -(-h // block_size)
    grid_w = -(-w // block_size)
    mvx = np.zeros((grid_h, grid_w))
    mvy = np.zeros((grid_h, grid_w))
    for bx, by, dx, dy in records:
        if bx >= grid_w or by >= grid_h:
            raise ValueError(
                f"block ({bx}, {by}) outside {grid_w}x{grid_h} grid "
                f"for {w}x{h} frames with block_size {block_size}"
            )
        mvx[by, bx] = dx
        mvy[by, bx] = dy
    return MotionField(block_size, grid_w, grid_h, mvx, mvy, search_radius)
