"""Bradley-Terry strengths and bootstrap Elo ratings from pairwise battles."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import DegenerateWins, DisconnectedGraph

A_WINS = "a"
B_WINS = "b"
TIE = "tie"

_SCALE = 400.0 / math.log(10.0)
_ANCHOR = 1000.0


@dataclass(frozen=True)
class Battle:
    model_a: str
    model_b: str
    outcome: str  # "a" | "b" | "tie"

    def __post_init__(self) -> None:
        if self.model_a == self.model_b:
            raise ValueError("a battle needs two distinct models")
        if self.outcome not in (A_WINS, B_WINS, TIE):
            raise ValueError(f"unknown outcome {self.outcome!r}")


@dataclass(frozen=True)
class EloEstimate:
    median: float
    ci_low: float
    ci_high: float


def _win_matrix(battles: Sequence[Battle]) -> tuple[list[str], np.ndarray]:
    models = sorted({b.model_a for b in battles} | {b.model_b for b in battles})
    index = {m: i for i, m in enumerate(models)}
    wins = np.zeros((len(models), len(models)), dtype=float)
    for b in battles:
        i, j = index[b.model_a], index[b.model_b]
        if b.outcome == A_WINS:
            wins[i, j] += 1.0
        elif b.outcome == B_WINS:
            wins[j, i] += 1.0
        else:  # ties credit half a win to each side
            wins[i, j] += 0.5
            wins[j, i] += 0.5
    return models, wins


def _check_connected(models: list[str], wins: np.ndarray) -> None:
    n = len(models)
    games = wins + wins.T
    seen = {0}
    frontier = [0]
    while frontier:
        cur = frontier.pop()
        for nxt in np.flatnonzero(games[cur] > 0):
            if nxt not in seen:
                seen.add(int(nxt))
                frontier.append(int(nxt))
    if len(seen) != n:
        missing = [models[i] for i in range(n) if i not in seen]
        raise DisconnectedGraph(f"battle graph splits off {missing}")


def fit_bradley_terry(
    battles: Sequence[Battle], tol: float = 1e-9, max_iter: int = 10000
) -> dict[str, float]:
    """Maximum-likelihood strengths, normalized to geometric mean 1.

    Ties count as half a win for each side. Uses the standard
    minorization-maximization update; requires a connected comparison graph
    and at least one non-loss credit per model, and reports failure to
    converge (a dominant group whose likelihood is unbounded) as degenerate.
    """
    if not battles:
        raise DegenerateWins("no battles to fit")
    models, wins = _win_matrix(battles)
    if len(models) < 2:
        raise DegenerateWins("need at least two models")
    _check_connected(models, wins)
    credits = wins.sum(axis=1)
    if (credits <= 0).any():
        losers = [m for m, c in zip(models, credits) if c <= 0]
        raise DegenerateWins(f"models with no non-loss credit: {losers}")

    games = wins + wins.T
    s = np.ones(len(models))
    for _ in range(max_iter):
        denom = (games / (s[:, None] + s[None, :])).sum(axis=1)
        new = credits / denom
        new /= np.exp(np.mean(np.log(new)))
        delta = np.max(np.abs(new - s) / s)
        s = new
        if delta < tol:
            return dict(zip(models, s.tolist()))
    raise DegenerateWins("likelihood maximization did not converge")


def strengths_to_ratings(strengths: Mapping[str, float]) -> dict[str, float]:
    """Elo-style ratings: 1000 + (400/ln 10) * (ln s - mean ln s)."""
    logs = {m: math.log(s) for m, s in strengths.items()}
    center = sum(logs.values()) / len(logs)
    return {m: _ANCHOR + _SCALE * (v - center) for m, v in logs.items()}


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("MMFORGE_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def bootstrap_elo(
    battles: Sequence[Battle],
    rounds: int = 1000,
    seed: int = 0,
    workers: int | None = None,
) -> tuple[dict[str, EloEstimate], int]:
    """Median ratings with 95% percentile confidence intervals.

    Each round refits on a with-replacement resample drawn from an RNG seeded
    by (seed, round), so results are identical for any worker count or
    scheduling order. rounds=1 degenerates to the point fit on the full
    sample. Rounds whose resample is disconnected or degenerate are skipped;
    the count of skipped rounds is returned alongside the estimates.

    Raises DisconnectedGraph/DegenerateWins if the full battle set itself
    cannot be fit.
    """
    point = strengths_to_ratings(fit_bradley_terry(battles))
    if rounds <= 1:
        return {m: EloEstimate(r, r, r) for m, r in point.items()}, 0

    n = len(battles)

    def one_round(r: int) -> dict[str, float] | None:
        rng = np.random.default_rng([seed, r])
        sample = [battles[i] for i in rng.integers(0, n, n)]
        try:
            return strengths_to_ratings(fit_bradley_terry(sample))
        except (DisconnectedGraph, DegenerateWins):
            return None

    with ThreadPoolExecutor(max_workers=_worker_count(workers)) as pool:
        results = list(pool.map(one_round, range(rounds)))

    skipped = sum(1 for r in results if r is None)
    collected: dict[str, list[float]] = {m: [] for m in point}
    for ratings in results:
        if ratings is None:
            continue
        for m, r in ratings.items():
            collected[m].append(r)
    estimates = {}
    for m, vals in collected.items():
        if not vals:
            raise DegenerateWins("every bootstrap round was degenerate")
        arr = np.asarray(vals)
        estimates[m] = EloEstimate(
            float(np.median(arr)),
            float(np.percentile(arr, 2.5)),
            float(np.percentile(arr, 97.5)),
        )
    return estimates, skipped
