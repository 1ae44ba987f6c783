"""Per-example loss-token weights and the cross-device gradient scale."""

from __future__ import annotations

import math
from typing import Sequence

from .errors import AllZero, NonPositiveCount

VIDEO_CAPTION = "video_caption"
POINTING = "pointing"
OTHER = "other"

_FIXED_WEIGHTS = {VIDEO_CAPTION: 0.1, POINTING: 0.2}

# Substrings routing task/dataset labels onto weighting kinds; tracking maps
# to pointing by default (both emit long dense grounded outputs).
_POINTING_HINTS = ("point", "track", "count")
_VIDEO_CAPTION_HINTS = ("video_cap", "videocap", "video-cap", "video caption")


def task_kind(label: str, tracking_as_pointing: bool = True) -> str:
    """Map a free-form dataset/task label onto a weighting kind (total mapping)."""
    low = label.lower()
    if any(h in low for h in _VIDEO_CAPTION_HINTS):
        return VIDEO_CAPTION
    hints = _POINTING_HINTS if tracking_as_pointing else _POINTING_HINTS[:1]
    if any(h in low for h in hints):
        return POINTING
    return OTHER


def token_weight(kind: str, n: int) -> float:
    """Loss weight for an answer of n tokens.

    Video captions and pointing get fixed weights; everything else is scaled
    by 4/sqrt(n) so long and short answers contribute comparably.
    """
    if n < 1:
        raise NonPositiveCount(f"answer token count must be >= 1, got {n}")
    if kind in _FIXED_WEIGHTS:
        return _FIXED_WEIGHTS[kind]
    if kind != OTHER:
        raise ValueError(f"unknown task kind {kind!r}")
    return 4.0 / math.sqrt(n)


def grad_scale(per_device_loss_token_counts: Sequence[int]) -> float:
    """Shared per-device loss divisor: the mean loss-token count across devices.

    Dividing every device's total loss by the same mean (instead of each
    device's own count) makes the averaged gradient equal the global
    token-mean loss gradient, avoiding the bias that up-weights devices that
    happened to receive short answers.
    """
    counts = list(per_device_loss_token_counts)
    if not counts:
        raise ValueError("at least one device required")
    if any(c < 0 for c in counts):
        raise ValueError("token counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise AllZero("no device has any loss tokens")
    return total / len(counts)
