"""File formats and persistence for frames, detections, ground truth and tracks.

Formats (the package's public data contract):

* Frames: binary PGM ("P5", grayscale) or PPM ("P6", RGB), 8-bit, maxval 255.
  A frame sequence is a directory of files named ``<index>.pgm``/``.ppm`` with
  zero-padded, contiguous indices starting at 0, all sharing one size and
  channel count.
* Detections / ground truth / tracks: JSON Lines, one object per line, UTF-8.
  Box coordinates are floats in pixels, origin top-left, y down, stored as a
  4-element corner array [x_min, y_min, x_max, y_max].
    - detection: {"frame": int, "class": str, "score": float, "box": [...]}
    - ground truth: {"frame": int, "class": str, "box": [...],
                     "target_id": int, "visible": bool}
    - track: detection keys plus {"target_id": int, "fitness": float,
             "occluded": bool}
* Motion-vector sidecar: whitespace-separated text, one block per line:
  ``frame bx by dx dy`` with (bx, by) the block grid position and (dx, dy)
  the displacement in pixels. Lines starting with '#' are comments.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boxes import BoundingBox


class MediaFormatError(ValueError):
    """Malformed input file; message carries file, line number and field."""


def _fail(path, lineno, what) -> None:
    raise MediaFormatError(f"{path}:{lineno}: {what}")


# ---------------------------------------------------------------------------
# PGM / PPM frames


def read_image(path) -> np.ndarray:
    """Read a binary PGM/PPM file into a uint8 array (H, W) or (H, W, 3)."""
    data = Path(path).read_bytes()
    magic, pos = _pnm_token(data, 0, path)
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MediaFormatError(f"{path}: unsupported magic {magic!r}, expected P5 or P6")
    width, pos = _pnm_int(data, pos, path, "width")
    height, pos = _pnm_int(data, pos, path, "height")
    maxval, pos = _pnm_int(data, pos, path, "maxval")
    if maxval != 255:
        raise MediaFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    # exactly one whitespace byte separates the header from the raster
    raster = data[pos + 1 :]
    expected = width * height * channels
    if len(raster) < expected:
        raise MediaFormatError(
            f"{path}: raster truncated, expected {expected} bytes, got {len(raster)}"
        )
    img = np.frombuffer(raster[:expected], dtype=np.uint8)
    if channels == 1:
        return img.reshape(height, width).copy()
    return img.reshape(height, width, 3).copy()


def write_image(path, img: np.ndarray) -> None:
    """Write a uint8 array (H, W) or (H, W, 3) as binary PGM/PPM."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n" + f"{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def _pnm_token(data: bytes, pos: int, path) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines, then collect one token
    n = len(data)
    while pos < n:
        byte = data[pos : pos + 1]
        if byte.isspace():
            pos += 1
        elif byte == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise MediaFormatError(f"{path}: truncated header")
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def _pnm_int(data: bytes, pos: int, path, name: str) -> tuple[int, int]:
    token, pos = _pnm_token(data, pos, path)
    try:
        value = int(token)
    except ValueError:
        raise MediaFormatError(f"{path}: bad {name} {token!r}") from None
    if value <= 0:
        raise MediaFormatError(f"{path}: {name} must be positive, got {value}")
    return value, pos


def _read_header(path) -> tuple[int, int, int]:
    # (width, height, channels) from the PNM header; raster is not touched
    with open(path, "rb") as f:
        data = f.read(256)
    magic, pos = _pnm_token(data, 0, path)
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MediaFormatError(f"{path}: unsupported magic {magic!r}, expected P5 or P6")
    width, pos = _pnm_int(data, pos, path, "width")
    height, _ = _pnm_int(data, pos, path, "height")
    return width, height, channels


_FRAME_FILE = re.compile(r"^(\d+)\.(pgm|ppm)$")


class FrameSequence:
    """Ordered frame files in one directory, loaded on demand.

    Headers are validated up front: indices must be contiguous from 0 and all
    frames must share dimensions and channel count.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise MediaFormatError(f"{self.directory}: not a directory")
        found = {}
        for entry in self.directory.iterdir():
            m = _FRAME_FILE.match(entry.name)
            if m:
                found[int(m.group(1))] = entry
        if not found:
            raise MediaFormatError(f"{self.directory}: no .pgm/.ppm frames found")
        missing = sorted(set(range(max(found) + 1)) - set(found))
        if missing:
            raise MediaFormatError(
                f"{self.directory}: frame indices not contiguous, missing {missing}"
            )
        self._paths = [found[i] for i in range(len(found))]
        self.width, self.height, self.channels = _read_header(self._paths[0])
        for p in self._paths[1:]:
            header = _read_header(p)
            if header != (self.width, self.height, self.channels):
                raise MediaFormatError(
                    f"{p}: frame geometry {header} differs from frame 0 "
                    f"{(self.width, self.height, self.channels)}"
                )

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    def __len__(self) -> int:
        return len(self._paths)

    def __getitem__(self, index: int) -> np.ndarray:
        return read_image(self._paths[index])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def write_frames(directory, frames: Iterable[np.ndarray], ext: str = "pgm") -> list[Path]:
    """Write frames as <index>.pgm/.ppm with zero-padded 6-digit names."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        path = directory / f"{i:06d}.{ext}"
        write_image(path, frame)
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# JSON Lines records


@dataclass(frozen=True)
class DetectionRecord:
    frame: int
    class_id: str
    score: float
    box: BoundingBox


@dataclass(frozen=True)
class GroundTruthRecord:
    frame: int
    class_id: str
    box: BoundingBox
    target_id: int = 0
    visible: bool = True


@dataclass(frozen=True)
class TrackRecord:
    frame: int
    class_id: str
    score: float
    box: BoundingBox
    target_id: int
    fitness: float
    occluded: bool


def _parse_box(obj, path, lineno) -> BoundingBox:
    raw = obj.get("box")
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
    ):
        _fail(path, lineno, f"field 'box' must be a 4-element number array, got {raw!r}")
    try:
        return BoundingBox(*(float(v) for v in raw))
    except ValueError as exc:
        _fail(path, lineno, f"field 'box' invalid: {exc}")


def _field(obj, name, types, path, lineno):
    value = obj.get(name)
    if isinstance(value, bool) and bool not in types:
        _fail(path, lineno, f"field '{name}' has wrong type {type(value).__name__}")
    if not isinstance(value, types):
        _fail(path, lineno, f"field '{name}' missing or wrong type, got {value!r}")
    return value


def _unit_interval(obj, name, path, lineno) -> float:
    value = float(_field(obj, name, (int, float), path, lineno))
    if not 0.0 <= value <= 1.0:
        _fail(path, lineno, f"field '{name}' must be in [0, 1], got {value}")
    return value


def _frame_index(obj, path, lineno) -> int:
    value = _field(obj, "frame", (int,), path, lineno)
    if value < 0:
        _fail(path, lineno, f"field 'frame' must be >= 0, got {value}")
    return value


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                _fail(path, lineno, f"invalid JSON: {exc.msg}")
            if not isinstance(obj, dict):
                _fail(path, lineno, "each line must be a JSON object")
            yield lineno, obj


def read_detections(path) -> list[DetectionRecord]:
    records = []
    for lineno, obj in _iter_jsonl(path):
        records.append(
            DetectionRecord(
                frame=_frame_index(obj, path, lineno),
                class_id=str(_field(obj, "class", (str,), path, lineno)),
                score=_unit_interval(obj, "score", path, lineno),
                box=_parse_box(obj, path, lineno),
            )
        )
    return records


def read_ground_truth(path) -> list[GroundTruthRecord]:
    records = []
    for lineno, obj in _iter_jsonl(path):
        records.append(
            GroundTruthRecord(
                frame=_frame_index(obj, path, lineno),
                class_id=str(_field(obj, "class", (str,), path, lineno)),
                box=_parse_box(obj, path, lineno),
                target_id=_field(obj, "target_id", (int,), path, lineno),
                visible=_field(obj, "visible", (bool,), path, lineno),
            )
        )
    return records


def read_tracks(path) -> list[TrackRecord]:
    records = []
    for lineno, obj in _iter_jsonl(path):
        records.append(
            TrackRecord(
                frame=_frame_index(obj, path, lineno),
                class_id=str(_field(obj, "class", (str,), path, lineno)),
                score=_unit_interval(obj, "score", path, lineno),
                box=_parse_box(obj, path, lineno),
                target_id=_field(obj, "target_id", (int,), path, lineno),
                fitness=_unit_interval(obj, "fitness", path, lineno),
                occluded=_field(obj, "occluded", (bool,), path, lineno),
            )
        )
    return records


def _dump(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def write_detections(path, records: Sequence[DetectionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(
                _dump(
                    {"frame": r.frame, "class": r.class_id, "score": r.score,
                     "box": r.box.as_list()}
                )
                + "\n"
            )


def write_ground_truth(path, records: Sequence[GroundTruthRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(
                _dump(
                    {"frame": r.frame, "class": r.class_id, "box": r.box.as_list(),
                     "target_id": r.target_id, "visible": r.visible}
                )
                + "\n"
            )


def write_tracks(path, records: Sequence[TrackRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(
                _dump(
                    {"frame": r.frame, "class": r.class_id, "score": r.score,
                     "box": r.box.as_list(), "target_id": r.target_id,
                     "fitness": r.fitness, "occluded": r.occluded}
                )
                + "\n"
            )


def group_by_frame(records: Sequence) -> dict[int, list]:
    """Bucket records by their frame index (keys sorted ascending)."""
    grouped: dict[int, list] = {}
    for r in records:
        grouped.setdefault(r.frame, []).append(r)
    return dict(sorted(grouped.items()))


# ---------------------------------------------------------------------------
# Motion-vector sidecars


def read_motion_sidecar(path) -> dict[int, list[tuple[int, int, float, float]]]:
    """Read 'frame bx by dx dy' lines into {frame: [(bx, by, dx, dy), ...]}."""
    fields: dict[int, list[tuple[int, int, float, float]]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                _fail(path, lineno, f"expected 5 fields 'frame bx by dx dy', got {len(parts)}")
            try:
                frame, bx, by = int(parts[0]), int(parts[1]), int(parts[2])
                dx, dy = float(parts[3]), float(parts[4])
            except ValueError:
                _fail(path, lineno, f"non-numeric field in {parts!r}")
            if frame < 0 or bx < 0 or by < 0:
                _fail(path, lineno, "field 'frame'/'bx'/'by' must be >= 0")
            fields.setdefault(frame, []).append((bx, by, dx, dy))
    return dict(sorted(fields.items()))


def write_motion_sidecar(path, per_frame: dict[int, list[tuple[int, int, float, float]]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# frame bx by dx dy\n")
        for frame in sorted(per_frame):
            for bx, by, dx, dy in per_frame[frame]:
                f.write(f"{frame} {bx} {by} {dx:g} {dy:g}\n")
