"""Bipartite matching shared by the pointing and tracking metrics.

One matcher serves both: detection scoring needs a maximum-cardinality
matching over containment edges, and the tracking metric additionally
prefers, among maximum matchings, the one with the highest total association
score. Remaining ties resolve to the matching whose sorted (row, col) pair
list is lexicographically smallest, which is label-free and exactly
reproducible by enumeration.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

# Composite integer weights must stay exactly representable in float64.
_EXACT_LIMIT = 2**53


def _assignment_value(weights: np.ndarray) -> int:
    if weights.size == 0:
        return 0
    ri, ci = linear_sum_assignment(weights, maximize=True)
    return int(weights[ri, ci].sum())


def max_matching(
    edges: np.ndarray, assoc: np.ndarray | None = None
) -> list[tuple[int, int]]:
    """Maximum matching over a boolean edge matrix (rows x cols).

    Maximizes (cardinality, total assoc score) lexicographically; among the
    remaining optima returns the matching whose sorted pair list is smallest.
    That last step fixes pairs greedily in (row, col) order, keeping a pair
    exactly when some optimal matching extends the pairs fixed so far with it
    (verified by re-solving the reduced assignment problem).
    """
    rows, cols = edges.shape
    if rows == 0 or cols == 0 or not edges.any():
        return []
    if assoc is None:
        assoc = np.zeros(edges.shape, dtype=np.int64)
    assoc = np.asarray(assoc, dtype=np.int64)
    if assoc.shape != edges.shape:
        raise ValueError("assoc matrix must match edge matrix shape")
    if assoc.size and assoc.min() < 0:
        raise ValueError("assoc scores must be non-negative")

    # every edge outweighs any possible total assoc, so cardinality wins first
    card_bonus = min(rows, cols) * int(assoc.max()) + 1
    weights = np.where(edges, assoc + card_bonus, 0).astype(np.int64)
    if int(weights.sum()) >= _EXACT_LIMIT:
        raise OverflowError("matching instance too large for exact weights")
    best = _assignment_value(weights)

    fixed: list[tuple[int, int]] = []
    fixed_weight = 0
    used_r = np.zeros(rows, dtype=bool)
    used_c = np.zeros(cols, dtype=bool)
    for r in range(rows):
        if used_r[r]:
            continue
        for c in range(cols):
            if used_c[c] or not edges[r, c]:
                continue
            keep_r = ~used_r
            keep_r[r] = False
            keep_c = ~used_c
            keep_c[c] = False
            rest = _assignment_value(weights[np.ix_(keep_r, keep_c)])
            if fixed_weight + int(weights[r, c]) + rest == best:
                fixed.append((r, c))
                fixed_weight += int(weights[r, c])
                used_r[r] = True
                used_c[c] = True
                break
    return fixed
