"""Caption statement F1 over judge verdicts.

The judge itself is external: for every video it decomposes the model caption
and the human captions into atomic statements and marks, in both directions,
which statements the other side supports. This module only aggregates those
verdicts: per-video precision and recall, averaged over videos, combined by
harmonic mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..errors import ArityMismatch
from .pointing import PRF


@dataclass(frozen=True)
class JudgeVerdicts:
    """Support flags for one video: model->human and human->model."""

    model_supported: tuple[bool, ...]
    human_supported: tuple[bool, ...]


def _side_score(statements: Sequence[str], other: Sequence[str], flags: Sequence[bool]) -> float:
    if len(flags) != len(statements):
        raise ArityMismatch(
            f"{len(flags)} verdicts for {len(statements)} statements"
        )
    if not statements:
        return 1.0 if not other else 0.0
    return sum(flags) / len(statements)


def caption_f1(
    model_statements: Sequence[Sequence[str]],
    human_statements: Sequence[Sequence[str]],
    verdicts: Sequence[JudgeVerdicts],
) -> PRF:
    """Average per-video precision and recall, then take their harmonic mean."""
    if not (len(model_statements) == len(human_statements) == len(verdicts)):
        raise ArityMismatch("one statement pair and verdict set per video")
    if not verdicts:
        raise ArityMismatch("at least one video required")
    precisions = []
    recalls = []
    for model, human, v in zip(model_statements, human_statements, verdicts):
        precisions.append(_side_score(model, human, v.model_supported))
        recalls.append(_side_score(human, model, v.human_supported))
    p = sum(precisions) / len(precisions)
    r = sum(recalls) / len(recalls)
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1)
