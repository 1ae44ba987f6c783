"""Point-in-mask precision/recall/F1 for pointing and tracking predictions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import KindMismatch, MaskDimMismatch
from ..grounding import POINTS, TRACKS, GroundingBlock, denormalize_point
from ..matching import max_matching
from ..rle import RleMask

_GRID_EPS = 1e-6


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _prf(tp: int, fp: int, fn: int) -> PRF:
    if tp == 0 and fp == 0 and fn == 0:
        return PRF(1.0, 1.0, 1.0)  # nothing predicted, nothing to find
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1)


@dataclass(frozen=True)
class GtTrack:
    """One ground-truth object: its id and per-timestamp masks."""

    object_id: int
    frames: tuple[tuple[float, RleMask], ...]  # (grid timestamp, mask), time-sorted

    @classmethod
    def build(cls, object_id: int, frames) -> "GtTrack":
        return cls(object_id, tuple(sorted(frames, key=lambda f: f[0])))


def _mask_size(gts: Sequence[GtTrack]) -> tuple[int, int]:
    size: tuple[int, int] | None = None
    for track in gts:
        for _, mask in track.frames:
            if size is None:
                size = (mask.height, mask.width)
            elif size != (mask.height, mask.width):
                raise MaskDimMismatch(
                    f"masks mix {size} and {(mask.height, mask.width)}"
                )
    if size is None:
        raise MaskDimMismatch("ground truth contains no masks")
    return size


def point_f1_counts(
    pred: GroundingBlock, gts: Sequence[GtTrack], window_s: float = 1.5
) -> tuple[int, int, int]:
    """Raw (TP, FP, FN) behind point_f1, for micro-aggregation across videos."""
    if pred.kind != POINTS:
        raise KindMismatch(f"expected a {POINTS} block, got {pred.kind}")
    flat = [
        (locus.as_seconds, p) for locus, points in pred.frames for p in points
    ]
    if not gts:
        return 0, len(flat), 0
    height, width = _mask_size(gts)
    edges = np.zeros((len(flat), len(gts)), dtype=bool)
    for i, (t, point) in enumerate(flat):
        px, py = denormalize_point(point.x, point.y, width, height)
        for j, track in enumerate(gts):
            for tau, mask in track.frames:
                if abs(tau - t) <= window_s + _GRID_EPS and mask.contains_point(px, py):
                    edges[i, j] = True
                    break
    matched = len(max_matching(edges))
    return matched, len(flat) - matched, len(gts) - matched


def point_f1(
    pred: GroundingBlock, gts: Sequence[GtTrack], window_s: float = 1.5
) -> PRF:
    """Match predicted points to ground-truth objects by mask containment.

    A point may match any object whose mask contains its pixel in some
    annotated frame within +-window_s of the point's timestamp; a maximum
    bipartite matching then pairs each object with at most one point.
    """
    return _prf(*point_f1_counts(pred, gts, window_s))


def _on_grid(t: float, fps: float) -> int | None:
    slot = round(t * fps)
    return slot if abs(t - slot / fps) <= _GRID_EPS else None


def restrict_pred_to_grid(
    pred: GroundingBlock, fps: float
) -> dict[int, list[tuple[int, int, int]]]:
    """Per grid slot: (object_id, x, y) of predictions landing exactly on it."""
    out: dict[int, list[tuple[int, int, int]]] = {}
    for locus, points in pred.frames:
        slot = _on_grid(locus.as_seconds, fps)
        if slot is None:
            continue
        out.setdefault(slot, []).extend((p.object_id, p.x, p.y) for p in points)
    return out


def restrict_gt_to_grid(
    gts: Sequence[GtTrack], fps: float
) -> dict[int, list[tuple[int, RleMask]]]:
    """Per grid slot: (gt index, mask) for annotations landing exactly on it."""
    out: dict[int, list[tuple[int, RleMask]]] = {}
    for j, track in enumerate(gts):
        for tau, mask in track.frames:
            slot = _on_grid(tau, fps)
            if slot is not None:
                out.setdefault(slot, []).append((j, mask))
    return out


def track_f1(
    pred: GroundingBlock, gts: Sequence[GtTrack], eval_fps: float = 1.0
) -> PRF:
    """Frame-wise detection F1 for tracks, evaluated on the eval_fps grid.

    Identity-blind: per frame a maximum matching pairs predicted points with
    ground-truth masks by containment, and TP/FP/FN aggregate over frames.
    """
    if pred.kind != TRACKS:
        raise KindMismatch(f"expected a {TRACKS} block, got {pred.kind}")
    pred_slots = restrict_pred_to_grid(pred, eval_fps)
    gt_slots = restrict_gt_to_grid(gts, eval_fps)
    if not pred_slots and not gt_slots:
        return _prf(0, 0, 0)
    if not gt_slots:
        return _prf(0, sum(len(v) for v in pred_slots.values()), 0)
    height, width = _mask_size(gts)
    tp = fp = fn = 0
    for slot in sorted(set(pred_slots) | set(gt_slots)):
        points = pred_slots.get(slot, [])
        masks = gt_slots.get(slot, [])
        edges = np.zeros((len(points), len(masks)), dtype=bool)
        for i, (_, x, y) in enumerate(points):
            px, py = denormalize_point(x, y, width, height)
            for j, (_, mask) in enumerate(masks):
                edges[i, j] = mask.contains_point(px, py)
        matched = len(max_matching(edges))
        tp += matched
        fp += len(points) - matched
        fn += len(masks) - matched
    return _prf(tp, fp, fn)
