"""Deterministic synthetic scenes: frames, exact ground truth, noisy detections.

Desk-scale stand-in for real footage. Actors are smooth high-contrast
textured rectangles moving along scripted trajectories over a static
background, with optional static occluders drawn on top. Compositing is pure
integer arithmetic, so a fixed seed reproduces frames byte-for-byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boxes import BoundingBox
from .media_io import DetectionRecord, GroundTruthRecord

# actor boxes covered at least this much by occluders are marked not visible
VISIBILITY_THRESHOLD = 0.5


@dataclass
class ActorSpec:
    target_id: int
    width: int
    height: int
    x: int  # top-left at frame 0
    y: int
    trajectory: str = "linear"  # linear | sinusoidal | piecewise
    dx: float = 0.0
    dy: float = 0.0
    amplitude: float = 0.0  # sinusoidal y-swing, pixels
    period: float = 40.0  # sinusoidal period, frames
    waypoints: list[tuple[int, int, int]] = field(default_factory=list)  # (frame, x, y)
    label: str = "actor"
    texture_seed: int | None = None  # derived from scenario seed when None


@dataclass
class Occluder:
    x: int
    y: int
    width: int
    height: int
    fill: int = 210


@dataclass
class Scenario:
    dims: tuple[int, int] = (320, 240)
    n_frames: int = 100
    seed: int = 0
    actors: list[ActorSpec] = field(default_factory=list)
    occluders: list[Occluder] = field(default_factory=list)
    background: str = "constant"  # constant | noise
    background_value: int = 96

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.background not in ("constant", "noise"):
            raise ValueError(f"unknown background kind {self.background!r}")
        w, h = self.dims
        for actor in self.actors:
            if actor.width > w or actor.height > h:
                raise ValueError(
                    f"actor {actor.target_id} ({actor.width}x{actor.height}) "
                    f"larger than frame ({w}x{h})"
                )


def _round(v: float) -> int:
    # half-up rounding, independent of the platform's banker's rounding
    return int(math.floor(v + 0.5))


def actor_position(actor: ActorSpec, frame: int) -> tuple[int, int]:
    """Integer top-left of `actor` at `frame`."""
    if actor.trajectory == "linear":
        return actor.x + _round(actor.dx * frame), actor.y + _round(actor.dy * frame)
    if actor.trajectory == "sinusoidal":
        swing = _round(actor.amplitude * math.sin(2.0 * math.pi * frame / actor.period))
        return actor.x + _round(actor.dx * frame), actor.y + swing
    if actor.trajectory == "piecewise":
        points = sorted(actor.waypoints) or [(0, actor.x, actor.y)]
        if frame <= points[0][0]:
            return points[0][1], points[0][2]
        for (f0, x0, y0), (f1, x1, y1) in zip(points, points[1:]):
            if f0 <= frame <= f1:
                span = f1 - f0
                if span == 0:
                    return x1, y1
                return (
                    x0 + (x1 - x0) * (frame - f0) // span,
                    y0 + (y1 - y0) * (frame - f0) // span,
                )
        return points[-1][1], points[-1][2]
    raise ValueError(f"unknown trajectory {actor.trajectory!r}")


def _smooth_texture(rng: np.random.Generator, w: int, h: int, cell: int = 8) -> np.ndarray:
    """High-contrast texture with gradients everywhere: integer bilinear
    interpolation of a coarse random grid (cell x cell pixel spacing)."""
    gw = -(-w // cell) + 1
    gh = -(-h // cell) + 1
    grid = rng.integers(16, 240, size=(gh, gw), dtype=np.int64)
    xs = np.arange(w)
    ys = np.arange(h)
    cx, fx = xs // cell, xs % cell
    cy, fy = ys // cell, ys % cell
    v00 = grid[np.ix_(cy, cx)]
    v10 = grid[np.ix_(cy, cx + 1)]
    v01 = grid[np.ix_(cy + 1, cx)]
    v11 = grid[np.ix_(cy + 1, cx + 1)]
    wx = fx[None, :]
    wy = fy[:, None]
    val = (
        v00 * (cell - wx) * (cell - wy)
        + v10 * wx * (cell - wy)
        + v01 * (cell - wx) * wy
        + v11 * wx * wy
    ) // (cell * cell)
    return val.astype(np.uint8)


def generate(scenario: Scenario) -> tuple[list[np.ndarray], list[GroundTruthRecord]]:
    """Render all frames and exact per-frame ground truth boxes.

    Ground truth visibility flips to False on frames where occluders cover
    at least half of the actor's box. Raises if any actor leaves the frame.
    """
    w, h = scenario.dims
    if scenario.background == "constant":
        background = np.full((h, w), np.uint8(scenario.background_value))
    else:
        bg_rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 0xB6]))
        background = bg_rng.integers(0, 256, size=(h, w), dtype=np.uint8)

    textures = {}
    for actor in scenario.actors:
        seed = actor.texture_seed
        entropy = [scenario.seed, actor.target_id] if seed is None else [seed]
        t_rng = np.random.default_rng(np.random.SeedSequence(entropy))
        textures[actor.target_id] = _smooth_texture(t_rng, actor.width, actor.height)

    frames = []
    records = []
    for t in range(scenario.n_frames):
        frame = background.copy()
        for actor in scenario.actors:
            x, y = actor_position(actor, t)
            if x < 0 or y < 0 or x + actor.width > w or y + actor.height > h:
                raise ValueError(
                    f"actor {actor.target_id} leaves the frame at frame {t}: "
                    f"top-left ({x}, {y})"
                )
            frame[y : y + actor.height, x : x + actor.width] = textures[actor.target_id]
            records.append(
                GroundTruthRecord(
                    frame=t,
                    class_id=actor.label,
                    box=BoundingBox(float(x), float(y), float(x + actor.width),
                                    float(y + actor.height)),
                    target_id=actor.target_id,
                    visible=_coverage(actor, x, y, scenario.occluders) < VISIBILITY_THRESHOLD,
                )
            )
        for occ in scenario.occluders:
            ox0, oy0 = max(0, occ.x), max(0, occ.y)
            ox1, oy1 = min(w, occ.x + occ.width), min(h, occ.y + occ.height)
            if ox1 > ox0 and oy1 > oy0:
                frame[oy0:oy1, ox0:ox1] = np.uint8(occ.fill)
        frames.append(frame)
    return frames, records


def _coverage(actor: ActorSpec, x: int, y: int, occluders: list[Occluder]) -> float:
    # exact coverage fraction via a boolean raster over the actor box
    if not occluders:
        return 0.0
    mask = np.zeros((actor.height, actor.width), dtype=bool)
    for occ in occluders:
        ix0 = max(occ.x, x) - x
        iy0 = max(occ.y, y) - y
        ix1 = min(occ.x + occ.width, x + actor.width) - x
        iy1 = min(occ.y + occ.height, y + actor.height) - y
        if ix1 > ix0 and iy1 > iy0:
            mask[iy0:iy1, ix0:ix1] = True
    return float(mask.mean())


def corrupt_detections(
    gt: list[GroundTruthRecord],
    jitter: float,
    drop_rate: float,
    seed: int,
) -> list[DetectionRecord]:
    """Turn ground truth into an imperfect detection stream.

    Each record is dropped with probability `drop_rate`; survivors get every
    box coordinate shifted by an independent uniform draw from
    [-jitter, +jitter] and a confidence score drawn from [0.5, 1.0]. Works on
    exactly the records it is given; filter invisible ones beforehand if the
    stream should not see occluded actors.
    """
    rng = np.random.default_rng(seed)
    out = []
    for record in gt:
        if rng.random() < drop_rate:
            continue
        if jitter > 0:
            off = rng.uniform(-jitter, jitter, size=4)
        else:
            off = np.zeros(4)
        x0 = record.box.x_min + off[0]
        y0 = record.box.y_min + off[1]
        x1 = max(record.box.x_max + off[2], x0)
        y1 = max(record.box.y_max + off[3], y0)
        out.append(
            DetectionRecord(
                frame=record.frame,
                class_id=record.class_id,
                score=float(rng.uniform(0.5, 1.0)),
                box=BoundingBox(x0, y0, x1, y1),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Bundled scenarios and the flat key=value file format


def linear_scenario(n_frames: int = 100, seed: int = 42,
                    dims: tuple[int, int] = (320, 240)) -> Scenario:
    """One actor crossing the frame left to right at 2 px/frame."""
    return Scenario(
        dims=dims,
        n_frames=n_frames,
        seed=seed,
        actors=[ActorSpec(target_id=0, width=40, height=50, x=24, y=94,
                          trajectory="linear", dx=2.0, dy=0.0, label="walk")],
    )


def occlusion_scenario(n_frames: int = 60, seed: int = 42,
                       dims: tuple[int, int] = (320, 240)) -> Scenario:
    """One actor passing behind a full-height pillar.

    With the default geometry the actor box is fully covered on frames
    30-39 and counts as visible again (under 50% covered) from frame 44.
    """
    return Scenario(
        dims=dims,
        n_frames=n_frames,
        seed=seed,
        actors=[ActorSpec(target_id=0, width=36, height=44, x=20, y=98,
                          trajectory="linear", dx=4.0, dy=0.0, label="walk")],
        occluders=[Occluder(x=140, y=0, width=72, height=dims[1], fill=220)],
    )


def two_actor_scenario(n_frames: int = 100, seed: int = 42,
                       dims: tuple[int, int] = (320, 240)) -> Scenario:
    """Two separated actors moving in opposite directions."""
    return Scenario(
        dims=dims,
        n_frames=n_frames,
        seed=seed,
        actors=[
            ActorSpec(target_id=0, width=36, height=44, x=24, y=30,
                      trajectory="linear", dx=2.0, dy=0.0, label="walk"),
            ActorSpec(target_id=1, width=40, height=48, x=250, y=160,
                      trajectory="linear", dx=-2.0, dy=0.0, label="run"),
        ],
    )


PRESETS = {
    "linear": linear_scenario,
    "occlusion": occlusion_scenario,
    "two_actors": two_actor_scenario,
}


def load_scenario(path) -> Scenario:
    """Parse a flat key=value scenario file.

    Lines are ``key = value``; '#' starts a comment. ``actor`` and
    ``occluder`` keys may repeat and take space-separated ``k=v`` tokens,
    e.g. ``actor = id=0 x=30 y=95 w=40 h=50 traj=linear dx=2 dy=0``.
    """
    scalars: dict[str, str] = {}
    actors: list[ActorSpec] = []
    occluders: list[Occluder] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = key.strip(), value.strip()
        try:
            if key == "actor":
                actors.append(_parse_actor(_tokens(value)))
            elif key == "occluder":
                occluders.append(_parse_occluder(_tokens(value)))
            else:
                scalars[key] = value
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None

    dims = (320, 240)
    if "dims" in scalars:
        w, _, h = scalars["dims"].partition("x")
        dims = (int(w), int(h))
    return Scenario(
        dims=dims,
        n_frames=int(scalars.get("frames", 100)),
        seed=int(scalars.get("seed", 0)),
        actors=actors,
        occluders=occluders,
        background=scalars.get("background", "constant"),
        background_value=int(scalars.get("background_value", 96)),
    )


def _tokens(value: str) -> dict[str, str]:
    out = {}
    for token in value.split():
        k, sep, v = token.partition("=")
        if not sep:
            raise ValueError(f"expected k=v token, got {token!r}")
        out[k] = v
    return out


def _parse_actor(tok: dict[str, str]) -> ActorSpec:
    waypoints = []
    if "waypoints" in tok:
        for part in tok["waypoints"].split(";"):
            f, x, y = part.split(":")
            waypoints.append((int(f), int(x), int(y)))
    return ActorSpec(
        target_id=int(tok["id"]),
        width=int(tok["w"]),
        height=int(tok["h"]),
        x=int(tok.get("x", 0)),
        y=int(tok.get("y", 0)),
        trajectory=tok.get("traj", "linear"),
        dx=float(tok.get("dx", 0)),
        dy=float(tok.get("dy", 0)),
        amplitude=float(tok.get("amp", 0)),
        period=float(tok.get("period", 40)),
        waypoints=waypoints,
        label=tok.get("class", "actor"),
        texture_seed=int(tok["texture_seed"]) if "texture_seed" in tok else None,
    )


def _parse_occluder(tok: dict[str, str]) -> Occluder:
    return Occluder(
        x=int(tok["x"]),
        y=int(tok["y"]),
        width=int(tok["w"]),
        height=int(tok["h"]),
        fill=int(tok.get("fill", 210)),
    )
