"""Evaluation metrics: counting accuracy, point/track F1, HOTA, caption F1, Elo."""

from .counting import close_accuracy, exact_accuracy
from .pointing import PRF, GtTrack, point_f1, track_f1
from .hota import HotaScores, hota
from .caption import JudgeVerdicts, caption_f1
from .elo import (
    Battle,
    EloEstimate,
    bootstrap_elo,
    fit_bradley_terry,
    strengths_to_ratings,
)

__all__ = [
    "Battle",
    "EloEstimate",
    "GtTrack",
    "HotaScores",
    "JudgeVerdicts",
    "PRF",
    "bootstrap_elo",
    "caption_f1",
    "close_accuracy",
    "exact_accuracy",
    "fit_bradley_terry",
    "hota",
    "point_f1",
    "strengths_to_ratings",
    "track_f1",
]
