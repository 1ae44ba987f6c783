"""Message trees: one shared visual prefix, independent annotation branches.

A tree linearizes to a single span-covered sequence; a packed batch is a list
of linearized examples laid end to end. The attention predicate enforces:
no attention across examples, causal attention inside a branch, every branch
token sees the whole prefix of its own example, visual prefix tokens attend
bidirectionally among themselves, and interleaved prefix text stays causal.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import EmptyAnnotation, IndexOutOfRange, TooLarge

VISUAL = "visual"
TEXT = "text"
USER = "user"
ASSISTANT = "assistant"

MASK_MAGIC = b"MMMASK01"


@dataclass(frozen=True)
class PrefixSegment:
    kind: str  # visual | text
    count: int


@dataclass(frozen=True)
class Message:
    role: str  # user | assistant
    token_count: int
    loss_weight: float = 0.0


@dataclass(frozen=True)
class MessageTree:
    prefix: tuple[PrefixSegment, ...]
    branches: tuple[tuple[Message, ...], ...]


def build_tree(
    prefix_tokens: Iterable[PrefixSegment | tuple],
    annotations: Iterable[Iterable[Message | tuple]],
) -> MessageTree:
    """Build a tree with one branch per annotation, order preserved."""
    prefix = tuple(
        s if isinstance(s, PrefixSegment) else PrefixSegment(*s) for s in prefix_tokens
    )
    for seg in prefix:
        if seg.kind not in (VISUAL, TEXT):
            raise ValueError(f"unknown prefix token kind {seg.kind!r}")
        if seg.count < 1:
            raise ValueError("prefix segment counts must be positive")
    branches = []
    for ann in annotations:
        msgs = tuple(m if isinstance(m, Message) else Message(*m) for m in ann)
        if not msgs:
            raise EmptyAnnotation("annotation with no messages")
        for m in msgs:
            if m.role not in (USER, ASSISTANT):
                raise ValueError(f"unknown role {m.role!r}")
            if m.token_count < 1:
                raise ValueError("message token counts must be positive")
            if m.loss_weight > 0 and m.role != ASSISTANT:
                raise ValueError("only assistant messages may carry loss weight")
        branches.append(msgs)
    return MessageTree(prefix, tuple(branches))


PREFIX_BRANCH = -1  # branch id marking prefix spans


@dataclass(frozen=True)
class Span:
    start: int
    length: int
    example_id: int
    branch: int  # PREFIX_BRANCH for the prefix, else 0-based branch index
    kind: str
    role: str
    weight: float


@dataclass(frozen=True)
class LinearizedExample:
    total_len: int
    spans: tuple[Span, ...]


def linearize(tree: MessageTree, example_id: int = 0) -> LinearizedExample:
    """Prefix first, then branches in order, messages in order within a branch."""
    spans: list[Span] = []
    pos = 0
    for seg in tree.prefix:
        spans.append(Span(pos, seg.count, example_id, PREFIX_BRANCH, seg.kind, USER, 0.0))
        pos += seg.count
    for b, branch in enumerate(tree.branches):
        for msg in branch:
            spans.append(Span(pos, msg.token_count, example_id, b, TEXT, msg.role, msg.loss_weight))
            pos += msg.token_count
    return LinearizedExample(pos, tuple(spans))


PackedInput = Union["PackedLinearization", Sequence[LinearizedExample]]


class PackedLinearization:
    """Several linearized examples laid end to end, with per-position lookups."""

    def __init__(self, examples: Sequence[LinearizedExample]):
        self.examples = tuple(examples)
        total = sum(e.total_len for e in self.examples)
        self.total_len = total
        self.example_starts = []
        ex = np.empty(total, dtype=np.int32)
        br = np.empty(total, dtype=np.int32)
        vis = np.zeros(total, dtype=bool)
        offset = 0
        for i, e in enumerate(self.examples):
            self.example_starts.append(offset)
            cursor = 0
            for s in sorted(e.spans, key=lambda s: s.start):
                if s.start != cursor:
                    raise ValueError("spans must be contiguous and non-overlapping")
                cursor = s.start + s.length
                lo, hi = offset + s.start, offset + cursor
                ex[lo:hi] = i
                br[lo:hi] = s.branch
                vis[lo:hi] = s.kind == VISUAL
            if cursor != e.total_len:
                raise ValueError("spans must cover the full example length")
            offset += e.total_len
        self.example_of = ex
        self.branch_of = br
        self.is_visual = vis


def _coerce(packed: PackedInput) -> PackedLinearization:
    if isinstance(packed, PackedLinearization):
        return packed
    return PackedLinearization(packed)


def allows(packed: PackedInput, q: int, k: int) -> bool:
    """May the query token at position q attend to the key token at position k?"""
    p = _coerce(packed)
    if not (0 <= q < p.total_len and 0 <= k < p.total_len):
        raise IndexOutOfRange(f"positions ({q}, {k}) outside [0, {p.total_len})")
    if p.example_of[q] != p.example_of[k]:
        return False
    bq, bk = p.branch_of[q], p.branch_of[k]
    if bk != PREFIX_BRANCH:
        return bq == bk and k <= q
    if bq != PREFIX_BRANCH:
        return True  # branch tokens see the whole prefix of their example
    return k <= q or bool(p.is_visual[q] and p.is_visual[k])


def build_mask(packed: PackedInput, cap: int = 4096) -> np.ndarray:
    """Materialize the predicate as a dense boolean matrix (small sequences only)."""
    p = _coerce(packed)
    n = p.total_len
    if n > cap:
        raise TooLarge(f"sequence of {n} tokens exceeds the dense-mask cap {cap}")
    ex = p.example_of
    br = p.branch_of
    vis = p.is_visual
    pos = np.arange(n)
    same_ex = ex[:, None] == ex[None, :]
    causal = pos[None, :] <= pos[:, None]
    k_prefix = (br == PREFIX_BRANCH)[None, :]
    q_prefix = (br == PREFIX_BRANCH)[:, None]
    same_branch = br[:, None] == br[None, :]
    vis_pair = vis[:, None] & vis[None, :]
    branch_rule = ~k_prefix & same_branch & ~q_prefix & causal
    prefix_rule = k_prefix & (~q_prefix | causal | vis_pair)
    return same_ex & (branch_rule | prefix_rule)


def export_mask(packed: PackedInput, cap: int = 4096) -> bytes:
    """Dense mask as row-major bit-packed bytes behind a small header.

    Layout: 8-byte magic, u32 total length, u32 example count, one u32 start
    offset per example, then one bit-packed row per query position (big-endian
    bit order, rows padded to a whole byte).
    """
    p = _coerce(packed)
    mask = build_mask(p, cap=cap)
    header = MASK_MAGIC + struct.pack(
        "<II", p.total_len, len(p.examples)
    ) + struct.pack(f"<{len(p.examples)}I", *p.example_starts)
    return header + np.packbits(mask, axis=1).tobytes()


def read_mask_export(blob: bytes) -> tuple[np.ndarray, list[int]]:
    """Inverse of export_mask; returns (mask, example start offsets)."""
    if blob[:8] != MASK_MAGIC:
        raise ValueError("not a mask export blob")
    total, n_examples = struct.unpack_from("<II", blob, 8)
    starts = list(struct.unpack_from(f"<{n_examples}I", blob, 16))
    body = np.frombuffer(blob, dtype=np.uint8, offset=16 + 4 * n_examples)
    row_bytes = -(-total // 8)
    bits = np.unpackbits(body.reshape(total, row_bytes), axis=1)[:, :total]
    return bits.astype(bool), starts
