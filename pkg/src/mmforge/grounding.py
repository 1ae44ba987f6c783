"""Compact point/track text format: parsing, validation, serialization.

Answers localize objects as `<points coords="...">text</points>` or
`<tracks coords="...">text</tracks>`. The coords attribute holds
semicolon-separated frame groups; each group is a locus (1-based image index
or a timestamp with exactly one decimal digit) followed by one or more
`id x y` triples with coordinates normalized to [0, 1000]. Frames are sorted
by locus; within a frame, points blocks order points by (x, y) (object ids are
assigned in that order) while tracks blocks order points by object id (ids
persist across frames, so id order keeps tracks stable). The maximum object
id doubles as the object count.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    CoordOutOfRange,
    DuplicateObjectInFrame,
    InvariantViolation,
    KindMismatch,
    MalformedSyntax,
    NonMonotonicLoci,
    OutOfImage,
)

POINTS = "points"
TRACKS = "tracks"

_ELEMENT_RE = re.compile(r'<(points|tracks) coords="([^"]*)">(.*?)</\1>', re.DOTALL)
_TAG_RE = re.compile(r"</?(?:points|tracks)\b")
_IMAGE_RE = re.compile(r"^\d+$")
_TIME_RE = re.compile(r"^\d+\.\d$")
_INT_RE = re.compile(r"^-?\d+$")


@dataclass(frozen=True, order=True)
class Locus:
    """Frame address: a 1-based image index or a timestamp in tenths of a second."""

    is_time: bool
    value: int

    @classmethod
    def image(cls, index: int) -> "Locus":
        if index < 1:
            raise InvariantViolation(f"image index must be >= 1, got {index}")
        return cls(False, index)

    @classmethod
    def time_ds(cls, tenths: int) -> "Locus":
        if tenths < 0:
            raise InvariantViolation(f"timestamp must be non-negative, got {tenths}")
        return cls(True, tenths)

    @classmethod
    def seconds(cls, t: float) -> "Locus":
        """Timestamp from seconds, rounded to the tenth-of-second grid."""
        return cls.time_ds(int(math.floor(t * 10 + 0.5)))

    @property
    def as_seconds(self) -> float:
        """Locus on a common numeric axis: seconds for video, index for images."""
        return self.value / 10.0 if self.is_time else float(self.value)

    def render(self) -> str:
        if self.is_time:
            return f"{self.value // 10}.{self.value % 10}"
        return str(self.value)


@dataclass(frozen=True)
class GroundedPoint:
    object_id: int
    x: int
    y: int

    def sort_key(self) -> tuple[int, int, int]:
        return (self.x, self.y, self.object_id)


Frame = tuple[Locus, tuple[GroundedPoint, ...]]


def _frame_order_key(kind: str):
    if kind == TRACKS:
        return lambda p: p.object_id
    return GroundedPoint.sort_key


def _frame_out_of_order(kind: str, prev: GroundedPoint, cur: GroundedPoint) -> bool:
    if kind == TRACKS:
        return cur.object_id < prev.object_id
    return (cur.x, cur.y) < (prev.x, prev.y)


@dataclass(frozen=True)
class GroundingBlock:
    """One parsed answer: ordered frames of points plus the inline text."""

    kind: str
    frames: tuple[Frame, ...]
    inline_text: str = ""

    @classmethod
    def build(
        cls,
        kind: str,
        frames: Iterable[tuple[Locus, Iterable[GroundedPoint]]],
        inline_text: str = "",
    ) -> "GroundingBlock":
        """Canonical constructor: sorts frames by locus and points into the
        kind's canonical within-frame order."""
        key = _frame_order_key(kind)
        canon = tuple(
            (locus, tuple(sorted(points, key=key)))
            for locus, points in sorted(frames, key=lambda f: f[0])
        )
        block = cls(kind, canon, inline_text)
        block.validate()
        return block

    @property
    def is_video(self) -> bool:
        return bool(self.frames) and self.frames[0][0].is_time

    def count(self) -> int:
        """Total object count: the maximum object id, or 0 when empty."""
        ids = [p.object_id for _, pts in self.frames for p in pts]
        return max(ids) if ids else 0

    def validate(self) -> None:
        """Raise InvariantViolation unless all structural invariants hold."""
        if self.kind not in (POINTS, TRACKS):
            raise InvariantViolation(f"unknown kind {self.kind!r}")
        prev: Optional[Locus] = None
        seen_global: set[int] = set()
        for locus, points in self.frames:
            if prev is not None:
                if locus.is_time != prev.is_time:
                    raise InvariantViolation("mixed image/time loci in one block")
                if locus <= prev:
                    raise InvariantViolation("frame loci not strictly increasing")
            prev = locus
            if not points:
                raise InvariantViolation("frame with no points")
            seen_frame: set[int] = set()
            prev_point: Optional[GroundedPoint] = None
            for p in points:
                if p.object_id < 1:
                    raise InvariantViolation(f"object id must be >= 1, got {p.object_id}")
                if not (0 <= p.x <= 1000 and 0 <= p.y <= 1000):
                    raise InvariantViolation(f"coordinate out of [0, 1000]: ({p.x}, {p.y})")
                if p.object_id in seen_frame:
                    raise InvariantViolation(f"object id {p.object_id} repeated in frame")
                seen_frame.add(p.object_id)
                if self.kind == POINTS:
                    if p.object_id in seen_global:
                        raise InvariantViolation(
                            f"object id {p.object_id} repeated across frames in a points block"
                        )
                    seen_global.add(p.object_id)
                if prev_point is not None and _frame_out_of_order(self.kind, prev_point, p):
                    raise InvariantViolation(
                        "points within frame not in canonical order "
                        f"({'object id' if self.kind == TRACKS else '(x, y)'})"
                    )
                prev_point = p


@dataclass
class LenientReport:
    """Per-category counts of the violations repaired during lenient parsing."""

    violations: dict[str, int] = field(default_factory=dict)

    def add(self, category: str, n: int = 1) -> None:
        if n > 0:
            self.violations[category] = self.violations.get(category, 0) + n

    @property
    def total(self) -> int:
        return sum(self.violations.values())

    @property
    def clean(self) -> bool:
        return self.total == 0


def _extract_element(text: str, strict: bool) -> tuple[str, str, str]:
    matches = list(_ELEMENT_RE.finditer(text))
    if not matches:
        raise MalformedSyntax("no complete <points>/<tracks> element found")
    if strict and (len(matches) > 1 or len(_TAG_RE.findall(text)) != 2):
        raise MalformedSyntax("expected exactly one <points>/<tracks> element")
    m = matches[0]
    return m.group(1), m.group(2), m.group(3)


def _parse_locus(token: str) -> Locus:
    if _IMAGE_RE.match(token):
        index = int(token)
        if index < 1:
            raise MalformedSyntax(f"image index must be >= 1, got {token!r}")
        return Locus(False, index)
    if _TIME_RE.match(token):
        whole, frac = token.split(".")
        return Locus(True, int(whole) * 10 + int(frac))
    raise MalformedSyntax(f"bad locus {token!r}")


def _parse_triple(toks: Sequence[str]) -> GroundedPoint:
    vals = []
    for t in toks:
        if not _INT_RE.match(t):
            raise MalformedSyntax(f"non-integer field {t!r}")
        vals.append(int(t))
    oid, x, y = vals
    if oid < 1:
        raise MalformedSyntax(f"object id must be >= 1, got {oid}")
    if not (0 <= x <= 1000 and 0 <= y <= 1000):
        raise CoordOutOfRange(f"coordinate out of [0, 1000]: ({x}, {y})")
    return GroundedPoint(oid, x, y)


def _check_hint(kind: str, kind_hint: Optional[str]) -> None:
    if kind_hint is not None and kind_hint not in (POINTS, TRACKS):
        raise ValueError(f"kind_hint must be {POINTS!r} or {TRACKS!r}")
    if kind_hint is not None and kind != kind_hint:
        raise KindMismatch(f"expected <{kind_hint}>, got <{kind}>")


def parse(text: str, kind_hint: Optional[str] = None) -> GroundingBlock:
    """Strict parse of a grounding answer.

    The text must contain exactly one well-formed element whose coords satisfy
    every invariant: strictly increasing homogeneous loci, (x, y)-sorted points,
    distinct object ids per frame (and per block for points).
    """
    kind, coords, inline = _extract_element(text, strict=True)
    _check_hint(kind, kind_hint)

    frames: list[Frame] = []
    prev: Optional[Locus] = None
    seen_global: set[int] = set()
    if coords:
        for group in coords.split(";"):
            toks = group.split()
            if len(toks) < 4 or (len(toks) - 1) % 3 != 0:
                raise MalformedSyntax(f"frame group {group!r} has wrong arity")
            locus = _parse_locus(toks[0])
            if prev is not None:
                if locus.is_time != prev.is_time:
                    raise MalformedSyntax("mixed image indices and timestamps")
                if locus <= prev:
                    raise NonMonotonicLoci(
                        f"locus {locus.render()} not after {prev.render()}"
                    )
            prev = locus
            points: list[GroundedPoint] = []
            seen_frame: set[int] = set()
            for i in range(1, len(toks), 3):
                p = _parse_triple(toks[i : i + 3])
                if p.object_id in seen_frame:
                    raise DuplicateObjectInFrame(
                        f"object id {p.object_id} repeated in frame {locus.render()}"
                    )
                seen_frame.add(p.object_id)
                if kind == POINTS:
                    if p.object_id in seen_global:
                        raise DuplicateObjectInFrame(
                            f"object id {p.object_id} repeated across frames in a points block"
                        )
                    seen_global.add(p.object_id)
                if points and _frame_out_of_order(kind, points[-1], p):
                    raise MalformedSyntax(
                        f"points in frame {locus.render()} not in canonical order"
                    )
                points.append(p)
            frames.append((locus, tuple(points)))
    return GroundingBlock(kind, tuple(frames), inline)


def parse_lenient(
    text: str, kind_hint: Optional[str] = None
) -> tuple[GroundingBlock, LenientReport]:
    """Recovering parse for scoring model outputs.

    Repairs what can be repaired (clamps coordinates, drops duplicate ids and
    broken triples, reorders frames and points) and counts every repair in the
    returned report. Unrecoverable input (no element at all, tag disagreeing
    with kind_hint) still raises.
    """
    report = LenientReport()
    matches = list(_ELEMENT_RE.finditer(text))
    if not matches:
        raise MalformedSyntax("no complete <points>/<tracks> element found")
    if len(matches) > 1 or len(_TAG_RE.findall(text)) != 2:
        report.add("element")
    kind, coords, inline = matches[0].group(1), matches[0].group(2), matches[0].group(3)
    _check_hint(kind, kind_hint)

    raw_frames: list[tuple[Locus, list[GroundedPoint]]] = []
    locus_type: Optional[bool] = None
    for group in coords.split(";") if coords else []:
        toks = group.split()
        if not toks:
            report.add("frame")
            continue
        try:
            locus = _parse_locus(toks[0])
        except MalformedSyntax:
            report.add("frame")
            continue
        if locus_type is None:
            locus_type = locus.is_time
        elif locus.is_time != locus_type:
            report.add("frame")
            continue
        body = toks[1:]
        if len(body) % 3 != 0:
            report.add("triple")
            body = body[: len(body) - len(body) % 3]
        points: list[GroundedPoint] = []
        for i in range(0, len(body), 3):
            trip = body[i : i + 3]
            if not all(_INT_RE.match(t) for t in trip):
                report.add("triple")
                continue
            oid, x, y = (int(t) for t in trip)
            if oid < 1:
                report.add("triple")
                continue
            cx, cy = min(max(x, 0), 1000), min(max(y, 0), 1000)
            if (cx, cy) != (x, y):
                report.add("coord_range")
            points.append(GroundedPoint(oid, cx, cy))
        if points:
            raw_frames.append((locus, points))
        else:
            report.add("frame")

    ordered = sorted(range(len(raw_frames)), key=lambda i: (raw_frames[i][0], i))
    if ordered != list(range(len(raw_frames))):
        report.add("order")
    merged: list[tuple[Locus, list[GroundedPoint]]] = []
    for i in ordered:
        locus, points = raw_frames[i]
        if merged and merged[-1][0] == locus:
            report.add("order")
            merged[-1][1].extend(points)
        else:
            merged.append((locus, list(points)))

    seen_global: set[int] = set()
    frames: list[Frame] = []
    order_key = _frame_order_key(kind)
    for locus, points in merged:
        kept: list[GroundedPoint] = []
        seen_frame: set[int] = set()
        for p in points:
            if p.object_id in seen_frame or (kind == POINTS and p.object_id in seen_global):
                report.add("duplicate_id")
                continue
            seen_frame.add(p.object_id)
            seen_global.add(p.object_id)
            kept.append(p)
        canon = sorted(kept, key=order_key)
        if canon != kept:
            report.add("order")
        if canon:
            frames.append((locus, tuple(canon)))
    return GroundingBlock(kind, tuple(frames), inline), report


def serialize(block: GroundingBlock) -> str:
    """Emit the canonical text form; parse(serialize(b)) == b for valid blocks."""
    try:
        block.validate()
    except InvariantViolation:
        raise
    groups = []
    for locus, points in block.frames:
        triples = " ".join(f"{p.object_id} {p.x} {p.y}" for p in points)
        groups.append(f"{locus.render()} {triples}")
    coords = ";".join(groups)
    return f'<{block.kind} coords="{coords}">{block.inline_text}</{block.kind}>'


def count(block: GroundingBlock) -> int:
    """Object count encoded by the block: its maximum object id."""
    return block.count()


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


def normalize_point(px: float, py: float, width: float, height: float) -> tuple[int, int]:
    """Pixel coordinates to the normalized [0, 1000] grid (half away from zero)."""
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    if not (0 <= px <= width and 0 <= py <= height):
        raise OutOfImage(f"({px}, {py}) outside {width}x{height}")
    x = min(max(_round_half_away(1000.0 * px / width), 0), 1000)
    y = min(max(_round_half_away(1000.0 * py / height), 0), 1000)
    return x, y


def denormalize_point(x: int, y: int, width: float, height: float) -> tuple[float, float]:
    """Normalized coordinates back to (real-valued) pixels."""
    return x * width / 1000.0, y * height / 1000.0


@dataclass(frozen=True)
class AlignmentResult:
    """Predicted frames snapped onto a fixed-fps evaluation grid."""

    grid_fps: float
    aligned: Mapping[int, tuple[GroundedPoint, ...]]  # slot index -> points
    unaligned: tuple[Frame, ...]

    def slot_seconds(self, slot: int) -> float:
        return slot / self.grid_fps


def align_to_frames(
    block: GroundingBlock, grid_fps: float, tolerance_s: float
) -> AlignmentResult:
    """Snap each video frame to the nearest grid timestamp within tolerance.

    Frames farther than the tolerance from any grid point are reported as
    unaligned rather than raised; frames snapping to the same slot are merged
    in time order.
    """
    if grid_fps <= 0:
        raise ValueError("grid_fps must be positive")
    if block.frames and not block.is_video:
        raise KindMismatch("align_to_frames requires a video (timestamp) block")
    aligned: dict[int, list[GroundedPoint]] = {}
    unaligned: list[Frame] = []
    for locus, points in block.frames:
        t = locus.as_seconds
        slot = _round_half_away(t * grid_fps)
        if abs(t - slot / grid_fps) <= tolerance_s + 1e-12:
            aligned.setdefault(slot, []).extend(points)
        else:
            unaligned.append((locus, points))
    return AlignmentResult(
        grid_fps,
        {k: tuple(v) for k, v in aligned.items()},
        tuple(unaligned),
    )
