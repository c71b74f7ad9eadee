"""Per-actor visual tracker driven by the coyote optimizer.

Each tracked actor owns a fixed appearance template (the pixels under its
initial box), a velocity-propagated search window, and a running color
histogram model. Every frame, a small COA swarm searches the window for the
candidate box whose pixels best match the template under an L2 score
normalized to [0, 1]. A best score below the acceptance threshold freezes the
reported box; if the histogram model also stops matching, the actor counts as
occluded and the search window grows geometrically until the target is
reacquired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import coa
from .boxes import BoundingBox, CenterBox

PIXEL_RANGE = 255.0


@dataclass
class TrackerConfig:
    ft_threshold: float = 0.90  # accept / occlusion-detection fitness threshold
    n_packs: int = 2
    n_coyotes: int = 5
    iterations_per_frame: int = 10
    expansion_factor: float = 2.0  # search-window growth per occluded frame
    max_expansion: float = 8.0  # cap, in multiples of the original window
    size_search: bool = True  # also optimize (w, h), within +/- size_margin
    size_margin: float = 0.20
    early_exit_fitness: float = 0.98  # stop the per-frame swarm at this score
    lost_iteration_scale: int = 3  # extra swarm iterations while occluded
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.ft_threshold < 1.0:
            raise ValueError("ft_threshold must be in (0, 1)")
        if self.iterations_per_frame < 1:
            raise ValueError("iterations_per_frame must be >= 1")
        if self.expansion_factor <= 1.0:
            raise ValueError("expansion_factor must be > 1")
        if self.max_expansion < 1.0:
            raise ValueError("max_expansion must be >= 1")
        if not 0.0 <= self.size_margin < 1.0:
            raise ValueError("size_margin must be in [0, 1)")
        if self.lost_iteration_scale < 1:
            raise ValueError("lost_iteration_scale must be >= 1")


def _iround(v: float) -> int:
    return int(math.floor(v + 0.5))


def extract_patch(frame: np.ndarray, window: CenterBox) -> np.ndarray | None:
    """Pixels under `window`, clamped to the frame; None when nothing is left."""
    h, w = frame.shape[:2]
    pw = _iround(window.w)
    ph = _iround(window.h)
    x0 = _iround(window.cx - window.w / 2.0)
    y0 = _iround(window.cy - window.h / 2.0)
    x0c, x1c = max(0, x0), min(w, x0 + pw)
    y0c, y1c = max(0, y0), min(h, y0 + ph)
    if x1c <= x0c or y1c <= y0c:
        return None
    return frame[y0c:y1c, x0c:x1c]


def resample_nearest(patch: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor resample to (height, width); channels untouched."""
    ph, pw = patch.shape[:2]
    if (ph, pw) == (height, width):
        return patch
    ys = (np.arange(height) * ph) // height
    xs = (np.arange(width) * pw) // width
    return patch[np.ix_(ys, xs)]


def patch_distance(candidate: np.ndarray, template: np.ndarray) -> float:
    """Euclidean (L2) distance between two same-shaped patches, all channels."""
    if candidate.shape != template.shape:
        raise ValueError(f"patch shape mismatch: {candidate.shape} vs {template.shape}")
    diff = candidate.astype(np.float64) - template.astype(np.float64)
    return float(np.sqrt(np.sum(diff * diff)))


def patch_fitness(candidate: np.ndarray, template: np.ndarray) -> float:
    """Similarity in [0, 1]: 1 - per-pixel RMS error over the pixel range.

    1 means identical patches; 0 means the per-pixel RMS difference reaches
    the full 8-bit range.
    """
    d = patch_distance(candidate, template)
    rms = d / math.sqrt(template.size)
    return 1.0 - min(1.0, rms / PIXEL_RANGE)


def _histogram(patch: np.ndarray) -> np.ndarray:
    """Normalized 256-bin histogram; one row per channel."""
    if patch.ndim == 2:
        planes = [patch]
    else:
        planes = [patch[:, :, c] for c in range(patch.shape[2])]
    rows = [np.bincount(p.ravel(), minlength=256).astype(np.float64) for p in planes]
    hist = np.stack(rows)
    return hist / hist.sum(axis=1, keepdims=True)


def histogram_intersection(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-channel histogram intersection, in [0, 1]."""
    return float(np.minimum(a, b).sum() / a.shape[0])


class CoaTracker:
    """Tracks one actor; construct on the frame where its box was detected."""

    def __init__(
        self,
        frame: np.ndarray,
        box: BoundingBox,
        config: TrackerConfig | None = None,
        target_id: int = 0,
        class_id: str = "actor",
        score: float = 1.0,
    ):
        self.config = config or TrackerConfig()
        self.target_id = target_id
        self.class_id = class_id
        self.score = score
        h, w = frame.shape[:2]
        self.frame_w = w
        self.frame_h = h
        if box.x_min < 0 or box.y_min < 0 or box.x_max > w or box.y_max > h:
            raise ValueError(f"initial box {box} outside {w}x{h} frame")
        if box.area() <= 0:
            raise ValueError(f"initial box {box} has zero area")

        self.position = box.to_center()
        self.velocity = (0.0, 0.0)
        self.search_space = CenterBox(self.position.cx, self.position.cy,
                                      self.position.w, self.position.h)
        self._original_size = (self.position.w, self.position.h)
        template = extract_patch(frame, self.position)
        if template is None or template.size == 0:
            raise ValueError(f"initial box {box} selects no pixels")
        self.template = template.copy()
        self.model_histogram = _histogram(self.template)
        self._hist_updates = 1
        self.occluded = False
        self.occluded_frames = 0
        self.best_fitness = 1.0
        self._frames_since_accept = 0
        # exponentially smoothed velocity; only feeds extrapolation seeds,
        # since single-frame displacements are too jittery to project far
        self._smooth_velocity = (0.0, 0.0)
        self._rng = np.random.default_rng(
            np.random.SeedSequence([self.config.rng_seed & 0xFFFFFFFF, target_id])
        )

    # -- per-frame pieces ---------------------------------------------------

    def advance_search_space(self) -> CenterBox:
        """Move the search window by the current velocity, keeping its center
        inside the frame; the window size is left to the occlusion logic."""
        xs = min(max(self.position.cx + self.velocity[0], 0.0), float(self.frame_w))
        ys = min(max(self.position.cy + self.velocity[1], 0.0), float(self.frame_h))
        self.search_space = CenterBox(xs, ys, self.search_space.w, self.search_space.h)
        return self.search_space

    def window_fitness(self, window: CenterBox, frame: np.ndarray) -> float:
        """Template-match score of one candidate window on `frame`."""
        patch = extract_patch(frame, window)
        if patch is None:
            return 0.0
        th, tw = self.template.shape[:2]
        return patch_fitness(resample_nearest(patch, th, tw), self.template)

    def handle_occlusion(self) -> None:
        """Grow the search window geometrically, capped at max_expansion times
        the original window and at the frame size."""
        cfg = self.config
        ow, oh = self._original_size
        ws = min(self.search_space.w * cfg.expansion_factor,
                 cfg.max_expansion * ow, float(self.frame_w))
        hs = min(self.search_space.h * cfg.expansion_factor,
                 cfg.max_expansion * oh, float(self.frame_h))
        self.search_space = CenterBox(self.search_space.cx, self.search_space.cy, ws, hs)
        self.occluded_frames += 1

    # -- main step ----------------------------------------------------------

    def track(self, frame: np.ndarray) -> tuple[BoundingBox, float]:
        """Advance one frame; returns the reported box and the best fitness.

        The reported position moves only when the best fitness reaches the
        acceptance threshold; otherwise position and velocity hold, and the
        occlusion logic decides whether to expand the search window.
        """
        if frame.shape[:2] != (self.frame_h, self.frame_w):
            raise ValueError(
                f"frame shape {frame.shape[:2]} differs from init "
                f"{(self.frame_h, self.frame_w)}"
            )
        cfg = self.config
        search = self.advance_search_space()
        pos = self.position
        self._frames_since_accept += 1
        k = self._frames_since_accept
        ow, oh = self._original_size

        if not cfg.size_search:
            w_lo = w_hi = pos.w
            h_lo = h_hi = pos.h
        elif k >= 2:
            # reacquisition: the size may have drifted during the partial
            # occlusion, so search a range that still contains the template's
            # own dimensions
            margin = cfg.size_margin
            w_lo, w_hi = min(pos.w, ow) * (1 - margin), max(pos.w, ow) * (1 + margin)
            h_lo, h_hi = min(pos.h, oh) * (1 - margin), max(pos.h, oh) * (1 + margin)
        else:
            w_lo, w_hi = pos.w * (1 - cfg.size_margin), pos.w * (1 + cfg.size_margin)
            h_lo, h_hi = pos.h * (1 - cfg.size_margin), pos.h * (1 + cfg.size_margin)
        lower = np.array([max(0.0, search.cx - search.w / 2), max(0.0, search.cy - search.h / 2),
                          w_lo, h_lo])
        upper = np.array([min(float(self.frame_w), search.cx + search.w / 2),
                          min(float(self.frame_h), search.cy + search.h / 2), w_hi, h_hi])

        iterations = cfg.iterations_per_frame * (cfg.lost_iteration_scale if self.occluded else 1)
        coa_config = coa.CoaConfig(
            n_packs=cfg.n_packs,
            n_coyotes_per_pack=cfg.n_coyotes,
            dimension=4,
            lower_bounds=lower,
            upper_bounds=upper,
            max_iterations=iterations,
            rng_seed=int(self._rng.integers(2**63)),
        )

        def objective(v: np.ndarray) -> float:
            return 1.0 - self.window_fitness(CenterBox(v[0], v[1], v[2], v[3]), frame)

        # warm starts: the velocity-predicted window and the held position;
        # after missed frames, constant-velocity extrapolations of the
        # smoothed motion, since a hidden target most likely kept moving
        if k >= 2:
            vx, vy = self._smooth_velocity
            seeds = [
                np.array([pos.cx + vx * k, pos.cy + vy * k, ow, oh]),
                np.array([pos.cx + vx * k, pos.cy + vy * k, pos.w, pos.h]),
                np.array([pos.cx + vx * 0.75 * k, pos.cy + vy * 0.75 * k, ow, oh]),
                np.array([pos.cx + vx * 1.25 * k, pos.cy + vy * 1.25 * k, ow, oh]),
                np.array([pos.cx, pos.cy, pos.w, pos.h]),
            ][: cfg.n_coyotes]
        else:
            seeds = [np.array([search.cx, search.cy, pos.w, pos.h]),
                     np.array([pos.cx, pos.cy, pos.w, pos.h])]
        loss_target = 1.0 - cfg.early_exit_fitness
        result = coa.run(coa_config, objective, stop=lambda f: f <= loss_target, initial=seeds)

        fitness = 1.0 - result.best_fitness
        best = CenterBox(result.best_solution[0], result.best_solution[1],
                         max(0.0, result.best_solution[2]), max(0.0, result.best_solution[3]))
        self.best_fitness = fitness

        if fitness >= cfg.ft_threshold:
            # displacement since the last accepted frame, per frame elapsed;
            # k is 1 in normal tracking, larger after held/occluded frames
            self.velocity = ((best.cx - pos.cx) / k, (best.cy - pos.cy) / k)
            alpha = 0.2
            self._smooth_velocity = (
                (1 - alpha) * self._smooth_velocity[0] + alpha * self.velocity[0],
                (1 - alpha) * self._smooth_velocity[1] + alpha * self.velocity[1],
            )
            self.position = best
            self.search_space = CenterBox(best.cx, best.cy, best.w, best.h)
            self.occluded = False
            self.occluded_frames = 0
            self._frames_since_accept = 0
            self._update_histogram(frame, best)
        else:
            # histogram check against the swarm's best window: only when both
            # the L2 score and the model similarity fail is the target lost
            self.occluded = self._model_similarity(frame, best) < cfg.ft_threshold
            if self.occluded:
                self.handle_occlusion()
        return self.position.to_corner(), fitness

    def _model_similarity(self, frame: np.ndarray, window: CenterBox) -> float:
        patch = extract_patch(frame, window)
        if patch is None:
            return 0.0
        return histogram_intersection(self.model_histogram, _histogram(patch))

    def _update_histogram(self, frame: np.ndarray, window: CenterBox) -> None:
        patch = extract_patch(frame, window)
        if patch is None:
            return
        self._hist_updates += 1
        weight = 1.0 / self._hist_updates
        self.model_histogram = (1.0 - weight) * self.model_histogram + weight * _histogram(patch)


def track_multi(
    trackers: list[CoaTracker],
    frame: np.ndarray,
) -> list[tuple[CoaTracker, BoundingBox, float]]:
    """Advance several independent trackers (one swarm each) on one frame."""
    ids = [t.target_id for t in trackers]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate target ids: {ids}")
    return [(t, *t.track(frame)) for t in trackers]
