"""Deterministic frame/crop/token geometry.

Computes frame timestamps at a fixed sampling fps, crop grids for tiled
high-resolution encoding, pooled token counts per crop or frame, and
slow/fast pathway assignment. All token numbers here are budget-level
counts consumed by the packer; no pixels are touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

from .errors import BadArity, NonPositiveDuration, TooManyFrames

SLOW = "slow"
FAST = "fast"

# (periodicity, max frames) pairs keeping peak vision tokens near the
# 128-frame default budget.
SLOWFAST_BOUNDS = ((1, 128), (2, 224), (3, 300), (4, 368))


@dataclass(frozen=True)
class SamplerConfig:
    sample_fps: float = 2.0
    max_frames: int = 128
    crop_limit: int = 8
    crop_side: int = 378
    patch: int = 14
    image_pool: int = 2
    video_pool: int = 3
    fast_pool: int = 9
    per_frame_extra_tokens: int = 2
    overlap_patches: int = 4

    def __post_init__(self) -> None:
        if self.sample_fps <= 0 or self.max_frames < 1 or self.crop_limit < 1:
            raise ValueError("sample_fps, max_frames, crop_limit must be positive")
        if self.crop_side % self.patch != 0:
            raise ValueError("crop_side must be divisible by patch size")

    @property
    def patches_per_side(self) -> int:
        return self.crop_side // self.patch

    def frame_tokens(self, fast: bool = False) -> int:
        """LLM tokens contributed by one video frame, markers included."""
        pool = self.fast_pool if fast else self.video_pool
        grid = pooled_grid(self.patches_per_side, pool)
        return grid.tokens + self.per_frame_extra_tokens

    def image_crop_tokens(self) -> int:
        """Pooled tokens for one image crop."""
        return pooled_grid(self.patches_per_side, self.image_pool).tokens


TRAIN_CONFIG = SamplerConfig()
INFERENCE_CONFIG = replace(TRAIN_CONFIG, crop_limit=24)
LONG_CONTEXT_CONFIG = replace(TRAIN_CONFIG, max_frames=384)


@dataclass(frozen=True)
class FrameSamplingPlan:
    timestamps: tuple[float, ...]
    pathway: tuple[str, ...]
    periodicity: int = 1

    def __post_init__(self) -> None:
        if len(self.timestamps) != len(self.pathway):
            raise BadArity("one pathway flag per timestamp")

    @property
    def frame_count(self) -> int:
        return len(self.timestamps)


class PooledGrid(NamedTuple):
    rows: int
    cols: int
    tokens: int


@dataclass(frozen=True)
class CropPlan:
    grid: tuple[int, int]  # (rows, cols)
    includes_global_crop: bool
    resize_to: tuple[int, int]  # (width, height) the source is resized to
    retained: float  # fraction of source pixels kept, capped at 1
    tokens_per_crop: int
    total_crops: int


def _fps_ticks(duration_s: float, fps: float) -> list[float]:
    kmax = int(math.floor(duration_s * fps + 1e-9))
    while kmax > 0 and kmax / fps > duration_s:
        kmax -= 1
    return [k / fps for k in range(kmax + 1)]


def _uniform_indices(n: int, take: int) -> list[int]:
    # take < n here, so consecutive picks differ by at least one index and
    # the first/last candidates are always kept.
    return sorted({int(i * (n - 1) / (take - 1) + 0.5) for i in range(take)})


def sample_timestamps(duration_s: float, cfg: SamplerConfig = TRAIN_CONFIG) -> FrameSamplingPlan:
    """Frames at the sampling fps plus the final frame, capped at max_frames.

    Above the cap, frames are picked uniformly over the candidate indices,
    always keeping the first and last. Timestamps are seconds, not frame
    indices, so decoders seek by time and variable-fps videos stay aligned.
    """
    if duration_s <= 0:
        raise NonPositiveDuration(f"duration must be positive, got {duration_s}")
    cand = _fps_ticks(duration_s, cfg.sample_fps)
    if cand[-1] < duration_s:
        cand.append(duration_s)
    if len(cand) > cfg.max_frames:
        cand = [cand[i] for i in _uniform_indices(len(cand), cfg.max_frames)]
    return FrameSamplingPlan(tuple(cand), (SLOW,) * len(cand))


def tracking_timestamps(duration_s: float, cfg: SamplerConfig = TRAIN_CONFIG) -> FrameSamplingPlan:
    """Frames for tracking: the fps grid trimmed (never subsampled) to max_frames.

    Keeping a prefix of the grid preserves alignment with point tracks
    annotated at the sampling fps; the off-grid final frame is omitted since
    no annotations exist there.
    """
    if duration_s <= 0:
        raise NonPositiveDuration(f"duration must be positive, got {duration_s}")
    ticks = _fps_ticks(duration_s, cfg.sample_fps)[: cfg.max_frames]
    return FrameSamplingPlan(tuple(ticks), (SLOW,) * len(ticks))


def pooled_grid(patches_per_side: int, pool: int) -> PooledGrid:
    """Token grid after pooling; edge windows pool a reduced patch count."""
    if patches_per_side < 1 or pool < 1:
        raise ValueError("patches_per_side and pool must be >= 1")
    side = -(-patches_per_side // pool)
    return PooledGrid(side, side, side * side)


def plan_crops(width: int, height: int, cfg: SamplerConfig = TRAIN_CONFIG) -> CropPlan:
    """Choose the overlapping crop grid for one image.

    Enumerates every grid with rows*cols <= crop_limit and keeps the one
    retaining the most source resolution, min(1, covered/source); adjacent
    crops overlap by a fixed margin of overlap_patches patches. Ties prefer
    fewer crops, then the grid whose covered area best matches the source
    aspect. A global crop of the downscaled full image is always added.
    """
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    overlap_px = cfg.overlap_patches * cfg.patch
    best: tuple[float, int, float, tuple[int, int], tuple[int, int]] | None = None
    for rows in range(1, cfg.crop_limit + 1):
        for cols in range(1, cfg.crop_limit // rows + 1):
            cov_w = cols * cfg.crop_side - (cols - 1) * overlap_px
            cov_h = rows * cfg.crop_side - (rows - 1) * overlap_px
            retained = min(1.0, (cov_w * cov_h) / (width * height))
            aspect_err = abs(math.log((cov_w / cov_h) / (width / height)))
            key = (retained, -(rows * cols), -aspect_err)
            if best is None or key > (best[0], best[1], best[2]):
                best = (retained, -(rows * cols), -aspect_err, (rows, cols), (cov_w, cov_h))
    assert best is not None
    retained, _, _, grid, (cov_w, cov_h) = best
    resize_to = (min(width, cov_w), min(height, cov_h))
    return CropPlan(
        grid=grid,
        includes_global_crop=True,
        resize_to=resize_to,
        retained=retained,
        tokens_per_crop=cfg.image_crop_tokens(),
        total_crops=grid[0] * grid[1] + 1,
    )


def slowfast_periodic(frame_count: int) -> tuple[int, tuple[str, ...]]:
    """Periodic pathway split: the smallest periodicity admitting frame_count."""
    if frame_count < 1:
        raise BadArity("frame_count must be >= 1")
    for p, bound in SLOWFAST_BOUNDS:
        if frame_count <= bound:
            flags = tuple(SLOW if i % p == 0 else FAST for i in range(frame_count))
            return p, flags
    raise TooManyFrames(
        f"{frame_count} frames exceed the {SLOWFAST_BOUNDS[-1][1]}-frame bound"
    )


def slowfast_scored(
    scores: Sequence[float], slow_count: int, effective_fps: float
) -> tuple[int, ...]:
    """Score-driven slow-frame selection.

    Half the slow frames are per-group maxima over contiguous temporal groups,
    the other half are the globally highest-scoring remaining frames; ties go
    to the earlier timestamp. Densely sampled videos (effective_fps >= 2) fall
    back to the periodic split.
    """
    total = len(scores)
    if slow_count < 2 or slow_count % 2 != 0 or slow_count > total:
        raise BadArity("slow_count must be even, >= 2 and <= len(scores)")
    if effective_fps >= 2:
        _, flags = slowfast_periodic(total)
        return tuple(i for i, f in enumerate(flags) if f == SLOW)

    half = slow_count // 2
    group = total // half
    picks: list[int] = []
    for g in range(half):
        start = g * group
        end = (g + 1) * group if g < half - 1 else total  # last group takes the remainder
        best = max(range(start, end), key=lambda i: (scores[i], -i))
        picks.append(best)
    chosen = set(picks)
    remaining = [i for i in range(total) if i not in chosen]
    remaining.sort(key=lambda i: (-scores[i], i))
    picks.extend(remaining[:half])
    return tuple(sorted(picks))
