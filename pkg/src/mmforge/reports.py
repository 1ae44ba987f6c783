"""Batch evaluation and packing reports over record streams.

Functions here take already-parsed JSONL records (the file schemas are the
package's external interface), shard independent videos across worker
threads, and return plain JSON-ready dicts carrying the tool version and the
fully resolved configuration. The HTTP service wraps these one-to-one; the
CLI only adds file IO.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from . import __version__, grounding
from .errors import MmforgeError
from .metrics import (
    Battle,
    GtTrack,
    JudgeVerdicts,
    bootstrap_elo,
    caption_f1,
    close_accuracy,
    exact_accuracy,
    hota,
    point_f1,
    track_f1,
)
from .metrics.pointing import PRF, point_f1_counts
from .packing import PackBudget, PackCandidate, pack_stream
from .rle import RleMask
from . import filters as data_filters


def _workers(n_items: int) -> int:
    env = os.environ.get("MMFORGE_THREADS")
    cap = int(env) if env else min(8, os.cpu_count() or 1)
    return max(1, min(cap, n_items))


def _parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map, sharded across worker threads."""
    if len(items) <= 1 or _workers(len(items)) == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_workers(len(items))) as pool:
        return list(pool.map(fn, items))


def _meta(command: str, config: Mapping[str, Any]) -> dict:
    return {"version": __version__, "command": command, "config": dict(config)}


def _gt_tracks(record: Mapping) -> tuple[tuple[int, int], list[GtTrack]]:
    height, width = record["size"]
    tracks = []
    for obj in record["objects"]:
        frames = [
            (float(f["t"]), RleMask(height, width, f["runs"])) for f in obj["frames"]
        ]
        tracks.append(GtTrack.build(int(obj["id"]), frames))
    return (height, width), tracks


def _align_ids(
    gt_records: Sequence[Mapping], pred_records: Sequence[Mapping]
) -> tuple[list[tuple[Mapping, Mapping]], list[str]]:
    gt_by_id = {r["video"]: r for r in gt_records}
    pred_by_id = {r["video"]: r for r in pred_records}
    common = [v for v in gt_by_id if v in pred_by_id]
    unmatched = sorted(set(gt_by_id) ^ set(pred_by_id))
    return [(gt_by_id[v], pred_by_id[v]) for v in common], unmatched


def _parse_answer(
    answer: str, kind: str
) -> tuple[grounding.GroundingBlock | None, int]:
    """Lenient parse; unparseable answers become an empty block of the kind."""
    try:
        block, rep = grounding.parse_lenient(answer, kind_hint=kind)
        return block, rep.total
    except MmforgeError:
        return None, 0


def _prf_dict(prf: PRF) -> dict:
    return {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}


def _mean(values: Iterable[float]) -> float:
    vals = list(values)
    return sum(vals) / len(vals) if vals else 0.0


def eval_points(
    gt_records: Sequence[Mapping],
    pred_records: Sequence[Mapping],
    window_s: float = 1.5,
    micro: bool = False,
) -> dict:
    """Point-in-mask F1 over videos; macro-averaged by default."""
    pairs, unmatched = _align_ids(gt_records, pred_records)

    def score(pair) -> dict:
        gt_rec, pred_rec = pair
        _, tracks = _gt_tracks(gt_rec)
        block, violations = _parse_answer(pred_rec["answer"], grounding.POINTS)
        if block is None:
            empty = grounding.GroundingBlock(grounding.POINTS, (), "")
            prf = point_f1(empty, tracks, window_s)
            return {"video": gt_rec["video"], "valid": False, "violations": 0, **_prf_dict(prf)}
        prf = point_f1(block, tracks, window_s)
        return {
            "video": gt_rec["video"],
            "valid": True,
            "violations": violations,
            **_prf_dict(prf),
        }

    rows = _parallel_map(score, pairs)
    agg = {
        "precision": _mean(r["precision"] for r in rows),
        "recall": _mean(r["recall"] for r in rows),
        "f1": _mean(r["f1"] for r in rows),
        "valid_accuracy": _mean(float(r["valid"]) for r in rows),
        "violation_count": sum(r["violations"] for r in rows),
        "unmatched_ids": unmatched,
        "examples": len(rows),
        "aggregation": "micro" if micro else "macro",
    }
    if micro:
        # micro needs raw counts; recompute from per-video TP/FP/FN proxies is
        # lossy, so run the counting path directly
        agg.update(_micro_points(pairs, window_s))
    return {
        "meta": _meta("eval.points", {"window_s": window_s, "micro": micro}),
        "aggregate": agg,
        "per_example": rows,
    }


def _micro_points(pairs, window_s: float) -> dict:
    tp = fp = fn = 0
    for gt_rec, pred_rec in pairs:
        _, tracks = _gt_tracks(gt_rec)
        block, _ = _parse_answer(pred_rec["answer"], grounding.POINTS)
        if block is None:
            block = grounding.GroundingBlock(grounding.POINTS, (), "")
        dtp, dfp, dfn = point_f1_counts(block, tracks, window_s)
        tp, fp, fn = tp + dtp, fp + dfp, fn + dfn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return {
        "precision": p,
        "recall": r,
        "f1": 2 * p * r / (p + r) if p + r else 0.0,
    }


def eval_tracks(
    gt_records: Sequence[Mapping],
    pred_records: Sequence[Mapping],
    eval_fps: float = 1.0,
) -> dict:
    """Track F1 and HOTA over videos at the evaluation fps."""
    pairs, unmatched = _align_ids(gt_records, pred_records)

    def score(pair) -> dict:
        gt_rec, pred_rec = pair
        _, tracks = _gt_tracks(gt_rec)
        block, violations = _parse_answer(pred_rec["answer"], grounding.TRACKS)
        valid = block is not None
        if block is None:
            block = grounding.GroundingBlock(grounding.TRACKS, (), "")
        prf = track_f1(block, tracks, eval_fps)
        scores = hota(block, tracks, eval_fps)
        return {
            "video": gt_rec["video"],
            "valid": valid,
            "violations": violations,
            **_prf_dict(prf),
            "hota": scores.hota,
            "det_a": scores.det_a,
            "ass_a": scores.ass_a,
        }

    rows = _parallel_map(score, pairs)
    agg = {
        "precision": _mean(r["precision"] for r in rows),
        "recall": _mean(r["recall"] for r in rows),
        "f1": _mean(r["f1"] for r in rows),
        "hota": _mean(r["hota"] for r in rows),
        "det_a": _mean(r["det_a"] for r in rows),
        "ass_a": _mean(r["ass_a"] for r in rows),
        "valid_accuracy": _mean(float(r["valid"]) for r in rows),
        "violation_count": sum(r["violations"] for r in rows),
        "unmatched_ids": unmatched,
        "examples": len(rows),
    }
    return {
        "meta": _meta("eval.tracks", {"eval_fps": eval_fps}),
        "aggregate": agg,
        "per_example": rows,
    }


def eval_count(
    gt_records: Sequence[Mapping], pred_records: Sequence[Mapping]
) -> dict:
    """Close and exact counting accuracy.

    Predictions carry either a bare integer count or a grounded answer whose
    maximum object id is the count.
    """
    pairs, unmatched = _align_ids(gt_records, pred_records)
    rows = []
    for gt_rec, pred_rec in pairs:
        gt = int(gt_rec["count"])
        valid = True
        if "count" in pred_rec:
            pred = int(pred_rec["count"])
        else:
            block, _ = _parse_answer(pred_rec["answer"], grounding.POINTS)
            valid = block is not None
            pred = block.count() if block is not None else 0
        rows.append(
            {
                "video": gt_rec["video"],
                "pred": pred,
                "gt": gt,
                "valid": valid,
                "close": close_accuracy(pred, gt),
                "exact": exact_accuracy(pred, gt),
            }
        )
    agg = {
        "close_accuracy": _mean(float(r["close"]) for r in rows),
        "exact_accuracy": _mean(float(r["exact"]) for r in rows),
        "valid_accuracy": _mean(float(r["valid"]) for r in rows),
        "unmatched_ids": unmatched,
        "examples": len(rows),
    }
    return {"meta": _meta("eval.count", {}), "aggregate": agg, "per_example": rows}


def eval_caption(
    gt_records: Sequence[Mapping], pred_records: Sequence[Mapping]
) -> dict:
    """Caption statement F1 from judge verdict records.

    The prediction record carries the model statements and the judge's
    model-to-human support flags; the ground-truth record carries the human
    statements and the human-to-model flags.
    """
    pairs, unmatched = _align_ids(gt_records, pred_records)
    model_statements = [list(p["statements"]) for _, p in pairs]
    human_statements = [list(g["statements"]) for g, _ in pairs]
    verdicts = [
        JudgeVerdicts(tuple(p["supported"]), tuple(g["supported"]))
        for g, p in pairs
    ]
    prf = caption_f1(model_statements, human_statements, verdicts)
    rows = [
        {
            "video": g["video"],
            "precision": _mean(map(float, p["supported"])) if p["statements"] else (1.0 if not g["statements"] else 0.0),
            "recall": _mean(map(float, g["supported"])) if g["statements"] else (1.0 if not p["statements"] else 0.0),
        }
        for g, p in pairs
    ]
    return {
        "meta": _meta("eval.caption", {}),
        "aggregate": {**_prf_dict(prf), "unmatched_ids": unmatched, "examples": len(rows)},
        "per_example": rows,
    }


def elo_leaderboard(
    battle_records: Sequence[Mapping],
    rounds: int = 1000,
    seed: int = 0,
    workers: int | None = None,
) -> dict:
    """Bootstrap Elo leaderboard from {"a", "b", "outcome"} records."""
    battles = [Battle(r["a"], r["b"], r["outcome"]) for r in battle_records]
    estimates, skipped = bootstrap_elo(battles, rounds=rounds, seed=seed, workers=workers)
    ranked = sorted(estimates.items(), key=lambda kv: (-kv[1].median, kv[0]))
    entries = [
        {
            "model": m,
            "rating": e.median,
            "ci_low": e.ci_low,
            "ci_high": e.ci_high,
            "rank": i + 1,
        }
        for i, (m, e) in enumerate(ranked)
    ]
    return {
        "meta": _meta("elo", {"rounds": rounds, "seed": seed}),
        "leaderboard": entries,
        "skipped_rounds": skipped,
        "battles": len(battles),
    }


def pack_manifest(
    records: Sequence[Mapping],
    max_tokens: int = 16384,
    max_crops: int = 128,
    crop_weight: int = 30,
    quantum: int = 32,
    pool_size: int = 48,
) -> dict:
    """Pack candidate records and summarize budget utilization."""
    budget = PackBudget(
        max_tokens=max_tokens,
        max_crops=max_crops,
        crop_weight=crop_weight,
        quantum=quantum,
        pool_size=pool_size,
    )
    candidates = [
        PackCandidate(str(r["id"]), int(r["text_tokens"]), int(r["crops"]))
        for r in records
    ]
    sequences = [
        {
            "ids": list(seq.ids),
            "tokens": seq.tokens,
            "quantized": seq.quantized,
            "crops": seq.crops,
            "objective": seq.objective,
        }
        for seq in pack_stream(candidates, budget)
    ]
    n = len(sequences)
    summary = {
        "sequences": n,
        "examples": len(candidates),
        "mean_examples_per_sequence": (len(candidates) / n) if n else 0.0,
        "token_utilization": _mean(s["tokens"] / max_tokens for s in sequences),
        "crop_utilization": _mean(s["crops"] / max_crops for s in sequences),
    }
    config = {
        "max_tokens": max_tokens,
        "max_crops": max_crops,
        "crop_weight": crop_weight,
        "quantum": quantum,
        "pool_size": pool_size,
    }
    return {"meta": _meta("pack", config), "sequences": sequences, "summary": summary}


def informativeness_report(records: Sequence[Mapping]) -> dict:
    """Score videos and drop those below mean minus one standard deviation."""
    scores = [
        data_filters.informativeness(r["bits"], r["duration"], r["w"], r["h"])
        for r in records
    ]
    kept_idx, stats = data_filters.filter_low_information(scores)
    kept = [records[i]["id"] for i in kept_idx]
    removed = [r["id"] for i, r in enumerate(records) if i not in set(kept_idx)]
    return {
        "meta": _meta("filter.informativeness", {}),
        "kept": kept,
        "removed": removed,
        "stats": {"mean": stats.mean, "std": stats.std, "threshold": stats.threshold},
        "scores": [
            {"id": r["id"], "score": s} for r, s in zip(records, scores)
        ],
    }


def diverse_report(
    records: Sequence[Mapping], target_n: int, chunk: int = 1000, seed: int = 0
) -> dict:
    stats = [
        data_filters.VideoStats(
            id=str(r["id"]),
            duration_s=float(r.get("duration", 1.0)),
            width=int(r.get("w", 1)),
            height=int(r.get("h", 1)),
            bit_cost=float(r.get("bits", 1.0)),
            keywords=tuple(r.get("keywords", ())),
            segment_count=float(r.get("segments", 0.0)),
        )
        for r in records
    ]
    selected, trace = data_filters.greedy_diverse_sample(
        stats, target_n, chunk=chunk, seed=seed, with_trace=True
    )
    config = {"target_n": target_n, "chunk": chunk, "seed": seed}
    return {
        "meta": _meta("filter.diverse", config),
        "selected": selected,
        "entropy_trajectory": trace,
    }


def decontaminate_report(
    pool_records: Sequence[Mapping],
    eval_records: Sequence[Mapping],
    threshold: float = 0.95,
    frames_per_video: int = 8,
) -> dict:
    pool = {str(r["id"]): np.asarray(r["frames"], dtype=float) for r in pool_records}
    evals = {str(r["id"]): np.asarray(r["frames"], dtype=float) for r in eval_records}
    removed = data_filters.decontaminate(pool, evals, threshold, frames_per_video)
    config = {"threshold": threshold, "frames_per_video": frames_per_video}
    return {
        "meta": _meta("filter.decontaminate", config),
        "removed": removed,
        "kept": [i for i in pool if i not in set(removed)],
    }


def split_clips_report(
    density: Sequence[float], min_s: int = 10, max_s: int = 30
) -> dict:
    cuts = data_filters.split_clips(density, min_s=min_s, max_s=max_s)
    clips = data_filters.clips_from_cuts(len(density), cuts)
    peak = max(
        (sum(density[a:b]) / (b - a) for a, b in clips),
        default=0.0,
    )
    return {
        "meta": _meta("filter.split-clips", {"min_s": min_s, "max_s": max_s}),
        "cuts": list(cuts),
        "clips": [list(c) for c in clips],
        "max_clip_density": peak,
    }


def grounding_dump(
    records: Sequence[Mapping], kind_hint: str | None = None, lenient: bool = False
) -> dict:
    """Parse answer records into structured blocks (the validate/convert surface).

    Every record gets an entry: parsed blocks come with their canonical
    serialization, failures carry the error name so downstream consumers can
    tally invalid predictions.
    """
    rows = []
    for r in records:
        entry: dict[str, Any] = {"id": r["id"]}
        try:
            if lenient:
                block, rep = grounding.parse_lenient(r["answer"], kind_hint=kind_hint)
                entry["violations"] = rep.total
            else:
                block = grounding.parse(r["answer"], kind_hint=kind_hint)
            entry.update(
                ok=True,
                block=block_to_json(block),
                canonical=grounding.serialize(block),
                count=block.count(),
            )
        except MmforgeError as err:
            entry.update(ok=False, error=err.name, detail=str(err))
        rows.append(entry)
    config = {"kind_hint": kind_hint, "lenient": lenient}
    return {"meta": _meta("grounding.parse", config), "results": rows}


def block_to_json(block: grounding.GroundingBlock) -> dict:
    frames = []
    for locus, points in block.frames:
        key = "t" if locus.is_time else "image"
        frames.append(
            {
                key: locus.as_seconds if locus.is_time else locus.value,
                "points": [{"id": p.object_id, "x": p.x, "y": p.y} for p in points],
            }
        )
    return {"kind": block.kind, "frames": frames, "text": block.inline_text}


def block_from_json(data: Mapping) -> grounding.GroundingBlock:
    frames = []
    for f in data.get("frames", []):
        if "t" in f and f["t"] is not None:
            locus = grounding.Locus.seconds(float(f["t"]))
        else:
            locus = grounding.Locus.image(int(f["image"]))
        points = tuple(
            grounding.GroundedPoint(int(p["id"]), int(p["x"]), int(p["y"]))
            for p in f["points"]
        )
        frames.append((locus, points))
    return grounding.GroundingBlock(
        data["kind"], tuple(frames), data.get("text", "")
    )
