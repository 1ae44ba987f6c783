"""Counting accuracy metrics."""

from __future__ import annotations


def close_accuracy(pred: int, gt: int) -> bool:
    """Correct if |pred - gt| <= 1 + floor(0.05 * gt).

    Computed as gt // 20 to keep the tolerance integer-exact.
    """
    if gt < 0:
        raise ValueError("ground-truth count must be non-negative")
    return abs(pred - gt) <= 1 + gt // 20


def exact_accuracy(pred: int, gt: int) -> bool:
    return pred == gt
