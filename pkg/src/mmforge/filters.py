"""Data-curation procedures: informativeness filtering, clip splitting,
entropy-greedy diversity sampling, decontamination, and mask-to-point
extraction.

The expensive perception steps (re-encoding videos for bit costs, CLIP frame
embeddings, SAM segmentation) are pluggable inputs; this module owns the
selection and scoring logic applied on top of them.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyEval,
    EmptyMask,
    NonPositive,
    OutOfUnitInterval,
    TargetTooLarge,
    TooFew,
    TooShort,
)
from .rle import RleMask


@dataclass(frozen=True)
class VideoStats:
    id: str
    duration_s: float
    width: int
    height: int
    bit_cost: float  # bits of the 1-fps re-encoded stream (pluggable provider)
    keywords: tuple[str, ...] = ()
    segment_count: float = 0.0  # mean segments per sampled frame

    def __post_init__(self) -> None:
        if self.duration_s <= 0 or self.width <= 0 or self.height <= 0 or self.bit_cost <= 0:
            raise NonPositive("duration, dimensions, and bit cost must be positive")


def informativeness(bit_cost: float, duration_s: float, width: float, height: float) -> float:
    """Encoded bits per (duration x width x height): a visual/temporal diversity proxy."""
    if min(bit_cost, duration_s, width, height) <= 0:
        raise NonPositive("all informativeness inputs must be positive")
    return bit_cost / (duration_s * width * height)


class ScoreStats(NamedTuple):
    mean: float
    std: float
    threshold: float


def filter_low_information(scores: Sequence[float]) -> tuple[list[int], ScoreStats]:
    """Keep indices whose score is at least mean minus one (population) std."""
    if len(scores) < 2:
        raise TooFew("need at least two scores to set a threshold")
    arr = np.asarray(scores, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std())
    threshold = mean - std
    kept = [i for i, s in enumerate(arr) if s >= threshold]
    return kept, ScoreStats(mean, std, threshold)


def split_clips(
    per_second_density: Sequence[float], min_s: int = 10, max_s: int = 30
) -> tuple[int, ...]:
    """Cut a video into clips minimizing the highest per-clip mean density.

    Clips are contiguous, each between min_s and max_s seconds (a video
    shorter than 2*min_s stays whole). Returns interior cut positions in
    seconds. Among optimal partitions, prefers fewer clips, then earlier cuts.
    """
    n = len(per_second_density)
    if n < min_s:
        raise TooShort(f"{n}s video is shorter than the {min_s}s minimum clip")
    if n < 2 * min_s:
        return ()
    prefix = [0.0]
    for d in per_second_density:
        prefix.append(prefix[-1] + float(d))

    def cost(a: int, b: int) -> float:
        return (prefix[b] - prefix[a]) / (b - a)

    # Phase 1: the optimal minimax value.
    best = [math.inf] * (n + 1)
    best[0] = -math.inf  # empty prefix contributes no clip cost
    for i in range(min_s, n + 1):
        for length in range(min_s, min(max_s, i) + 1):
            j = i - length
            if best[j] < math.inf:
                best[i] = min(best[i], max(best[j], cost(j, i)))
    peak = best[n]
    if math.isinf(peak):
        raise ValueError(f"no partition of {n}s into [{min_s}, {max_s}]s clips")

    # Phase 2: among partitions meeting the optimum, fewest clips then
    # lexicographically earliest cuts.
    unreachable: tuple[float, tuple[int, ...]] = (math.inf, ())
    state = [unreachable] * (n + 1)
    state[0] = (0, ())
    for i in range(min_s, n + 1):
        for length in range(min_s, min(max_s, i) + 1):
            j = i - length
            count, cuts = state[j]
            if math.isinf(count) or cost(j, i) > peak:
                continue
            cand = (count + 1, cuts + (j,) if j else cuts)
            if cand < state[i]:
                state[i] = cand
    return state[n][1]


def clips_from_cuts(duration: int, cuts: Sequence[int]) -> list[tuple[int, int]]:
    bounds = [0, *cuts, duration]
    return list(zip(bounds[:-1], bounds[1:]))


class _EntropyTracker:
    """Shannon entropy (base e) of a keyword multiset with O(|delta|) what-ifs."""

    def __init__(self) -> None:
        self.counts: Counter[str] = Counter()
        self.total = 0
        self._sum_clogc = 0.0  # sum over keywords of count*ln(count)

    @staticmethod
    def _clogc(c: int) -> float:
        return c * math.log(c) if c > 0 else 0.0

    def entropy(self) -> float:
        if self.total == 0:
            return 0.0
        return math.log(self.total) - self._sum_clogc / self.total

    def whatif_gain(self, keywords: Sequence[str]) -> float:
        if not keywords:
            return 0.0
        delta = Counter(keywords)
        sum_clogc = self._sum_clogc
        for kw, extra in delta.items():
            c = self.counts[kw]
            sum_clogc += self._clogc(c + extra) - self._clogc(c)
        total = self.total + len(keywords)
        new_entropy = math.log(total) - sum_clogc / total
        return new_entropy - self.entropy()

    def add(self, keywords: Sequence[str]) -> None:
        for kw in keywords:
            c = self.counts[kw]
            self._sum_clogc += self._clogc(c + 1) - self._clogc(c)
            self.counts[kw] = c + 1
            self.total += 1


def _segment_bin(segment_count: float) -> int:
    return int(math.floor(segment_count + 0.5))


def _competition_ranks(live: Sequence[int], score: Mapping[int, float]) -> dict[int, int]:
    """Descending competition ranks: equal scores share a rank (1, 1, 3, ...)."""
    order = sorted(live, key=lambda i: -score[i])
    ranks: dict[int, int] = {}
    for pos, i in enumerate(order):
        prev = order[pos - 1]
        ranks[i] = ranks[prev] if pos and score[i] == score[prev] else pos
    return ranks


def greedy_diverse_sample(
    candidates: Sequence[VideoStats],
    target_n: int,
    chunk: int = 1000,
    seed: int = 0,
    with_trace: bool = False,
):
    """Greedy diverse subset by keyword entropy and segment-count coverage.

    Each step scans one chunk of the seed-shuffled pool (cycling through
    chunks) and ranks its unselected candidates twice: by what-if entropy gain
    of the selected-set keyword distribution, and by a density score
    1/(1 + already-selected count in the candidate's unit-width segment-count
    bin). Equal scores share a rank, so a fully tied criterion drops out of
    the sum. The candidate minimizing the rank sum wins; ties go to the lower
    candidate index. Deterministic given the seed.

    Returns the selected ids, plus the keyword-entropy trajectory (entropy of
    the selected set after each pick) when with_trace is set.
    """
    if target_n > len(candidates):
        raise TargetTooLarge(f"cannot pick {target_n} of {len(candidates)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(candidates))
    chunks = [order[i : i + chunk].tolist() for i in range(0, len(order), chunk)]

    tracker = _EntropyTracker()
    bin_counts: Counter[int] = Counter()
    selected: list[str] = []
    selected_idx: set[int] = set()
    trace: list[float] = []
    chunk_cursor = 0
    for _ in range(target_n):
        live: list[int] = []
        for _ in range(len(chunks)):
            live = [i for i in chunks[chunk_cursor] if i not in selected_idx]
            chunk_cursor = (chunk_cursor + 1) % len(chunks)
            if live:
                break
        gains = {i: tracker.whatif_gain(candidates[i].keywords) for i in live}
        density = {
            i: 1.0 / (1.0 + bin_counts[_segment_bin(candidates[i].segment_count)])
            for i in live
        }
        rank1 = _competition_ranks(live, gains)
        rank2 = _competition_ranks(live, density)
        pick = min(live, key=lambda i: (rank1[i] + rank2[i], i))
        selected_idx.add(pick)
        selected.append(candidates[pick].id)
        tracker.add(candidates[pick].keywords)
        bin_counts[_segment_bin(candidates[pick].segment_count)] += 1
        trace.append(tracker.entropy())
    return (selected, trace) if with_trace else selected


def _subsample_frames(frames: np.ndarray, limit: int) -> np.ndarray:
    if len(frames) <= limit:
        return frames
    idx = [int(i * (len(frames) - 1) / (limit - 1) + 0.5) for i in range(limit)]
    return frames[sorted(set(idx))]


def decontaminate(
    pool_frame_embeddings: Mapping[str, np.ndarray],
    eval_frame_embeddings: Mapping[str, np.ndarray],
    threshold: float = 0.95,
    frames_per_video: int = 8,
) -> list[str]:
    """Ids of pool videos with a frame too similar to any evaluation frame.

    Embeddings are unit-normalized by the provider; similarity is the maximum
    pairwise dot product, and removal requires strictly exceeding the
    threshold. Videos supplying more than frames_per_video frames are
    uniformly subsampled first.
    """
    eval_rows = [
        _subsample_frames(np.asarray(v, dtype=float), frames_per_video)
        for v in eval_frame_embeddings.values()
        if len(v)
    ]
    if not eval_rows:
        raise EmptyEval("no evaluation frames supplied")
    eval_mat = np.vstack(eval_rows)
    removed = []
    for vid, frames in pool_frame_embeddings.items():
        arr = _subsample_frames(np.asarray(frames, dtype=float), frames_per_video)
        if len(arr) and float((arr @ eval_mat.T).max()) > threshold:
            removed.append(vid)
    return removed


@dataclass(frozen=True)
class MaskGeometry:
    """A mask with its centroid and in-mask boundary-distance field."""

    mask: RleMask
    dense: np.ndarray  # bool [y, x]
    centroid: tuple[float, float]  # (x, y)
    boundary_distance: np.ndarray  # float [y, x]; 0 on mask border pixels

    @classmethod
    def from_mask(cls, mask: RleMask) -> "MaskGeometry":
        dense = mask.to_dense()
        ys, xs = np.nonzero(dense)
        if len(xs) == 0:
            raise EmptyMask("mask has no foreground pixels")
        centroid = (float(xs.mean()), float(ys.mean()))
        # Pad before the distance transform so pixels on the image edge count
        # as border pixels too; subtract one so the border sits at zero.
        padded = np.pad(dense, 1)
        dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1] - 1.0
        dist[~dense] = 0.0
        return cls(mask, dense, centroid, dist)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        ys, xs = np.nonzero(self.dense)
        return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def extract_track_point(geom: MaskGeometry, alpha: float = 0.5) -> tuple[int, int]:
    """The in-mask pixel balancing closeness to the centroid against distance
    to the mask boundary; favouring interior pixels keeps tracked points from
    flickering between frames.

    Scores alpha*(1 - d_centroid/D) + (1-alpha)*(d_boundary/B) over mask
    pixels, with D and B the in-mask maxima (a degenerate maximum of zero
    makes its term neutral 1). Ties resolve in (y, x) scan order.
    """
    ys, xs = np.nonzero(geom.dense)
    cx, cy = geom.centroid
    d_cent = np.hypot(xs - cx, ys - cy)
    d_bound = geom.boundary_distance[ys, xs]
    dmax = d_cent.max()
    bmax = d_bound.max()
    cent_term = 1.0 - d_cent / dmax if dmax > 0 else np.ones_like(d_cent)
    bound_term = d_bound / bmax if bmax > 0 else np.ones_like(d_bound)
    scores = alpha * cent_term + (1.0 - alpha) * bound_term
    best = int(np.argmax(scores))  # nonzero() scans (y, x) order, argmax keeps the first
    return int(xs[best]), int(ys[best])


def sample_gaussian_point(
    geom: MaskGeometry,
    sigma_frac: float = 1.0 / 6.0,
    seed: int = 0,
    max_tries: int = 1000,
) -> tuple[int, int]:
    """Sample an in-mask pixel from a Gaussian around the mask centroid.

    The spread is sigma_frac of the bounding-box diagonal; rejection-samples
    until the pixel lands inside the mask, falling back to the deterministic
    track point after max_tries. Deterministic for a given seed.
    """
    cx, cy = geom.centroid
    x0, y0, x1, y1 = geom.bbox
    sigma = sigma_frac * math.hypot(x1 - x0 + 1, y1 - y0 + 1)
    rng = np.random.default_rng(seed)
    h, w = geom.dense.shape
    for _ in range(max_tries):
        px = int(math.floor(rng.normal(cx, sigma) + 0.5))
        py = int(math.floor(rng.normal(cy, sigma) + 0.5))
        if 0 <= px < w and 0 <= py < h and geom.dense[py, px]:
            return px, py
    return extract_track_point(geom)


KEEP = "keep"
REPROMPT = "reprompt"
DROP_TRACK = "drop_track"


def sam_prompt_policy(
    bbox_iou: float,
    mask_outside_fraction: float,
    track_mean_iou: float,
    reprompt_iou: float = 0.5,
    outside_threshold: float = 0.2,
    drop_iou: float = 0.5,
) -> str:
    """Decide whether a propagated mask is kept, re-prompted, or its track dropped.

    Tracks whose masks average under drop_iou against the ground-truth boxes
    are unusable; otherwise a frame is re-prompted with a fresh box when its
    mask drifts (low IoU) or leaks outside the box.
    """
    for name, v in (
        ("bbox_iou", bbox_iou),
        ("mask_outside_fraction", mask_outside_fraction),
        ("track_mean_iou", track_mean_iou),
    ):
        if not 0.0 <= v <= 1.0:
            raise OutOfUnitInterval(f"{name}={v} outside [0, 1]")
    if track_mean_iou < drop_iou:
        return DROP_TRACK
    if bbox_iou < reprompt_iou or mask_outside_fraction > outside_threshold:
        return REPROMPT
    return KEEP
