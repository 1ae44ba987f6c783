"""On-the-fly optimal packing of examples into fixed token/crop budgets.

A pool of candidates is solved as a two-dimensional 0/1 knapsack: maximize
total tokens plus crop_weight per crop, subject to the quantized token budget
and the crop budget. The token capacity is quantized so the DP state space
stays small; quantization rounds UP so a packed sequence can never exceed the
real budget. The streaming packer keeps the pool topped up, emits one optimal
subset at a time, and drains the remainder when the source is exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import CropOverflow, EmptyPool, InfeasibleCandidate

# Widest pool the vectorized solver handles: selections are tracked as bits
# of one int64 per DP state.
_MAX_VECTOR_POOL = 62


@dataclass(frozen=True)
class PackCandidate:
    id: str
    text_tokens: int  # total LLM tokens of the linearized example, visual included
    crops: int
    arrival: int = 0
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.text_tokens < 1:
            raise ValueError("text_tokens must be >= 1")
        if self.crops < 0:
            raise ValueError("crops must be >= 0")


@dataclass(frozen=True)
class PackBudget:
    max_tokens: int = 16384
    max_crops: int = 128
    crop_weight: int = 30
    quantum: int = 32
    pool_size: int = 48

    def __post_init__(self) -> None:
        if min(self.max_tokens, self.max_crops, self.crop_weight, self.quantum, self.pool_size) < 1:
            raise ValueError("all budget fields must be positive")
        if self.max_tokens % self.quantum != 0:
            raise ValueError("quantum must divide max_tokens")


SFT_BUDGET = PackBudget()
LONG_CONTEXT_BUDGET = PackBudget(max_tokens=36864, max_crops=384)


@dataclass(frozen=True)
class PackedSequence:
    ids: tuple[str, ...]  # ordered by arrival
    tokens: int
    quantized: int
    crops: int
    objective: int
    arrivals: tuple[int, ...] = ()


def quantize(tokens: int, quantum: int) -> int:
    """Round the token count up to the next multiple of the quantum."""
    if tokens < 1:
        raise ValueError("tokens must be >= 1")
    return quantum * math.ceil(tokens / quantum)


def _check_feasible(c: PackCandidate, budget: PackBudget) -> None:
    if quantize(c.text_tokens, budget.quantum) > budget.max_tokens:
        raise InfeasibleCandidate(
            f"candidate {c.id!r}: {c.text_tokens} tokens exceed the {budget.max_tokens} budget"
        )
    if c.crops > budget.max_crops:
        raise InfeasibleCandidate(
            f"candidate {c.id!r}: {c.crops} crops exceed the {budget.max_crops} budget"
        )


def truncate(candidate: PackCandidate, budget: PackBudget) -> PackCandidate:
    """Clip an over-long candidate to the token budget; crops cannot be clipped."""
    if candidate.crops > budget.max_crops:
        raise CropOverflow(
            f"candidate {candidate.id!r} has {candidate.crops} crops > {budget.max_crops}"
        )
    if quantize(candidate.text_tokens, budget.quantum) > budget.max_tokens:
        return replace(candidate, text_tokens=budget.max_tokens, truncated=True)
    return candidate


def solve(pool: Sequence[PackCandidate], budget: PackBudget) -> PackedSequence:
    """Exact optimal subset of the pool under the budget.

    Maximizes sum(text_tokens) + crop_weight * sum(crops) subject to
    sum(quantized tokens) <= max_tokens and sum(crops) <= max_crops. Among
    optima, prefers more examples, then the smallest arrival-index multiset.
    """
    if not pool:
        raise EmptyPool("solve() requires at least one candidate")
    for c in pool:
        _check_feasible(c, budget)
    order = sorted(range(len(pool)), key=lambda i: pool[i].arrival)
    items = [pool[i] for i in order]
    if len(items) <= _MAX_VECTOR_POOL:
        chosen = _solve_vectorized(items, budget)
    else:
        chosen = _solve_generic(items, budget)
    picked = [items[i] for i in chosen]
    tokens = sum(c.text_tokens for c in picked)
    quant = sum(quantize(c.text_tokens, budget.quantum) for c in picked)
    crops = sum(c.crops for c in picked)
    return PackedSequence(
        ids=tuple(c.id for c in picked),
        tokens=tokens,
        quantized=quant,
        crops=crops,
        objective=tokens + budget.crop_weight * crops,
        arrivals=tuple(c.arrival for c in picked),
    )


def _solve_vectorized(items: Sequence[PackCandidate], budget: PackBudget) -> list[int]:
    """Numpy DP over (token-quanta, crops) states.

    Each state keeps the lexicographically best (objective, count, selection)
    value. The selection is encoded so that bit (n-1-i) marks item i: a larger
    encoding is exactly a smaller sorted arrival multiset, so maximizing the
    triple realizes the documented tie-break, and the winning state needs no
    backtracking to decode.
    """
    n = len(items)
    nq = budget.max_tokens // budget.quantum
    nc = budget.max_crops
    shape = (nq + 1, nc + 1)
    obj = np.zeros(shape, dtype=np.int64)
    cnt = np.zeros(shape, dtype=np.int64)
    sel = np.zeros(shape, dtype=np.int64)
    for i, c in enumerate(items):
        dq = quantize(c.text_tokens, budget.quantum) // budget.quantum
        dc = c.crops
        value = c.text_tokens + budget.crop_weight * c.crops
        bit = np.int64(1) << (n - 1 - i)
        cand_obj = obj[: nq + 1 - dq, : nc + 1 - dc] + value
        cand_cnt = cnt[: nq + 1 - dq, : nc + 1 - dc] + 1
        cand_sel = sel[: nq + 1 - dq, : nc + 1 - dc] | bit
        base_obj = obj[dq:, dc:]
        base_cnt = cnt[dq:, dc:]
        base_sel = sel[dq:, dc:]
        better = (cand_obj > base_obj) | (
            (cand_obj == base_obj)
            & ((cand_cnt > base_cnt) | ((cand_cnt == base_cnt) & (cand_sel > base_sel)))
        )
        obj[dq:, dc:] = np.where(better, cand_obj, base_obj)
        cnt[dq:, dc:] = np.where(better, cand_cnt, base_cnt)
        sel[dq:, dc:] = np.where(better, cand_sel, base_sel)
    mask = int(sel[nq, nc])
    return [i for i in range(n) if mask >> (n - 1 - i) & 1]


def _solve_generic(items: Sequence[PackCandidate], budget: PackBudget) -> list[int]:
    """Fallback DP for pools too wide for single-word selection encoding."""
    n = len(items)
    nq = budget.max_tokens // budget.quantum
    nc = budget.max_crops
    empty = (0, 0, 0)
    dp: dict[tuple[int, int], tuple[int, int, int]] = {(0, 0): empty}
    for i, c in enumerate(items):
        dq = quantize(c.text_tokens, budget.quantum) // budget.quantum
        dc = c.crops
        value = c.text_tokens + budget.crop_weight * c.crops
        bit = 1 << (n - 1 - i)
        updates: dict[tuple[int, int], tuple[int, int, int]] = {}
        for (q, cr), (o, k, s) in dp.items():
            q2, c2 = q + dq, cr + dc
            if q2 > nq or c2 > nc:
                continue
            cand = (o + value, k + 1, s | bit)
            cur = updates.get((q2, c2)) or dp.get((q2, c2))
            if cur is None or cand > cur:
                updates[(q2, c2)] = cand
        dp.update(updates)
    best = max(dp.values())
    return [i for i in range(n) if best[2] >> (n - 1 - i) & 1]


def pack_stream(
    source: Iterable[PackCandidate],
    budget: PackBudget,
    pool_size: Optional[int] = None,
) -> Iterator[PackedSequence]:
    """Stream packed sequences from a candidate source.

    Fills the pool before every solve, removes the selected examples, and
    refills; once the source is exhausted the shrinking pool is drained until
    empty. Every admitted candidate appears in exactly one emitted sequence.
    Arrival indices are assigned in admission order. Single-owner: one
    producer, one consumer; run independent streams for parallelism.
    """
    target = pool_size if pool_size is not None else budget.pool_size
    it = iter(source)
    pool: list[PackCandidate] = []
    arrival = 0
    exhausted = False
    while True:
        while not exhausted and len(pool) < target:
            try:
                raw = next(it)
            except StopIteration:
                exhausted = True
                break
            c = replace(raw, arrival=arrival)
            arrival += 1
            _check_feasible(c, budget)
            pool.append(c)
        if not pool:
            return
        packed = solve(pool, budget)
        taken = set(packed.arrivals)
        pool = [c for c in pool if c.arrival not in taken]
        yield packed
