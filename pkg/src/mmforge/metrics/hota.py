"""Higher-order tracking accuracy adapted to point predictions.

Similarity is binary (a predicted point either falls inside a ground-truth
object's mask or it does not), which collapses the usual threshold sweep to a
single evaluation. Two passes: the first counts, per (object, track) pair, the
frames where they could match; the second matches each frame maximizing
matches first and association potential second, with remaining ties resolved
by the structural order of objects (input order for ground truth, first
appearance for predicted tracks) so results do not depend on id labels.

The association score of a matched pair is the fraction of frames, among all
frames where either side is present, in which the two were matched together;
this counts a frame where both are present but mismatched once, not twice.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import KindMismatch
from ..grounding import TRACKS, GroundingBlock, denormalize_point
from ..matching import max_matching
from .pointing import GtTrack, _mask_size, restrict_gt_to_grid, restrict_pred_to_grid


class HotaScores(NamedTuple):
    hota: float
    det_a: float
    ass_a: float


def hota(
    pred: GroundingBlock, gts: Sequence[GtTrack], eval_fps: float = 1.0
) -> HotaScores:
    if pred.kind != TRACKS:
        raise KindMismatch(f"expected a {TRACKS} block, got {pred.kind}")
    pred_slots = restrict_pred_to_grid(pred, eval_fps)
    gt_slots = restrict_gt_to_grid(gts, eval_fps)
    if not pred_slots and not gt_slots:
        return HotaScores(1.0, 1.0, 1.0)
    if not pred_slots or not gt_slots:
        return HotaScores(0.0, 0.0, 0.0)
    height, width = _mask_size(gts)

    # Predicted tracks ranked by first appearance (slot, then coordinates),
    # so scores cannot depend on how track ids happen to be numbered.
    first_seen: dict[int, tuple[int, int, int, int]] = {}
    for slot in sorted(pred_slots):
        for oid, x, y in pred_slots[slot]:
            first_seen.setdefault(oid, (slot, x, y, oid))
    track_rank = {
        oid: rank
        for rank, (oid, _) in enumerate(sorted(first_seen.items(), key=lambda kv: kv[1]))
    }
    n_pred = len(track_rank)
    n_gt = len(gts)

    pred_presence: list[set[int]] = [set() for _ in range(n_pred)]
    gt_presence: list[set[int]] = [set() for _ in range(n_gt)]
    slots = sorted(set(pred_slots) | set(gt_slots))
    contained: dict[int, np.ndarray] = {}
    for slot in slots:
        edges = np.zeros((n_gt, n_pred), dtype=bool)
        for j, _ in gt_slots.get(slot, []):
            gt_presence[j].add(slot)
        for oid, x, y in pred_slots.get(slot, []):
            i = track_rank[oid]
            pred_presence[i].add(slot)
            px, py = denormalize_point(x, y, width, height)
            for j, mask in gt_slots.get(slot, []):
                if mask.contains_point(px, py):
                    edges[j, i] = True
        contained[slot] = edges

    potential = np.zeros((n_gt, n_pred), dtype=np.int64)
    for slot in slots:
        potential += contained[slot]

    matched_count = np.zeros((n_gt, n_pred), dtype=np.int64)
    tp = fp = fn = 0
    tp_pairs: list[tuple[int, int]] = []
    for slot in slots:
        pairs = max_matching(contained[slot], potential)
        for j, i in pairs:
            matched_count[j, i] += 1
            tp_pairs.append((j, i))
        n_gt_here = len(gt_slots.get(slot, []))
        n_pred_here = len(pred_slots.get(slot, []))
        tp += len(pairs)
        fn += n_gt_here - len(pairs)
        fp += n_pred_here - len(pairs)

    det_a = tp / (tp + fn + fp) if tp + fn + fp else 0.0
    if tp == 0:
        return HotaScores(0.0, det_a, 0.0)
    ass_total = 0.0
    for j, i in tp_pairs:
        union = len(gt_presence[j] | pred_presence[i])
        ass_total += matched_count[j, i] / union
    ass_a = ass_total / tp
    return HotaScores(math.sqrt(det_a * ass_a), det_a, ass_a)
