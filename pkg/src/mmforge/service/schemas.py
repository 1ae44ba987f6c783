"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field


# -- grounding ---------------------------------------------------------------

class PointModel(BaseModel):
    id: int
    x: int
    y: int


class FrameModel(BaseModel):
    t: Optional[float] = None  # video timestamp (seconds), or
    image: Optional[int] = None  # 1-based image index
    points: List[PointModel]


class BlockModel(BaseModel):
    kind: Literal["points", "tracks"]
    frames: List[FrameModel]
    text: str = ""


class ParseRequest(BaseModel):
    text: str
    kind_hint: Optional[Literal["points", "tracks"]] = None
    lenient: bool = False


class ParseResponse(BaseModel):
    block: BlockModel
    count: int
    canonical: str
    violations: Optional[dict[str, int]] = None  # lenient mode only


class SerializeRequest(BaseModel):
    block: BlockModel


class SerializeResponse(BaseModel):
    text: str


class CountRequest(BaseModel):
    text: Optional[str] = None
    block: Optional[BlockModel] = None


class CountResponse(BaseModel):
    count: int


class NormalizeRequest(BaseModel):
    px: float
    py: float
    width: float
    height: float


class NormalizeResponse(BaseModel):
    x: int
    y: int


class DenormalizeRequest(BaseModel):
    x: int
    y: int
    width: float
    height: float


class DenormalizeResponse(BaseModel):
    px: float
    py: float


class AlignRequest(BaseModel):
    text: Optional[str] = None
    block: Optional[BlockModel] = None
    grid_fps: float
    tolerance_s: float


class AlignedFrame(BaseModel):
    slot: int
    t: float
    points: List[PointModel]


class AlignResponse(BaseModel):
    aligned: List[AlignedFrame]
    unaligned: List[FrameModel]


# -- geometry -----------------------------------------------------------------

class SamplerConfigModel(BaseModel):
    sample_fps: float = 2.0
    max_frames: int = 128
    crop_limit: int = 8
    crop_side: int = 378
    patch: int = 14
    image_pool: int = 2
    video_pool: int = 3
    fast_pool: int = 9
    per_frame_extra_tokens: int = 2
    overlap_patches: int = 4


class SampleRequest(BaseModel):
    duration_s: float
    tracking: bool = False
    config: SamplerConfigModel = Field(default_factory=SamplerConfigModel)


class SampleResponse(BaseModel):
    timestamps: List[float]
    pathway: List[str]
    periodicity: int


class CropRequest(BaseModel):
    width: int
    height: int
    config: SamplerConfigModel = Field(default_factory=SamplerConfigModel)


class CropResponse(BaseModel):
    rows: int
    cols: int
    includes_global_crop: bool
    resize_to: List[int]
    retained: float
    tokens_per_crop: int
    total_crops: int


class PooledGridRequest(BaseModel):
    patches_per_side: int
    pool: int


class PooledGridResponse(BaseModel):
    rows: int
    cols: int
    tokens: int


class SlowFastPeriodicRequest(BaseModel):
    frame_count: int


class SlowFastPeriodicResponse(BaseModel):
    periodicity: int
    pathway: List[str]


class SlowFastScoredRequest(BaseModel):
    scores: List[float]
    slow_count: int
    effective_fps: float


class SlowFastScoredResponse(BaseModel):
    slow_indices: List[int]


# -- message trees ---------------------------------------------------------

class PrefixSegmentModel(BaseModel):
    kind: Literal["visual", "text"]
    count: int


class MessageModel(BaseModel):
    role: Literal["user", "assistant"]
    token_count: int
    loss_weight: float = 0.0


class TreeModel(BaseModel):
    prefix: List[PrefixSegmentModel]
    branches: List[List[MessageModel]]


class LinearizeRequest(BaseModel):
    tree: TreeModel


class SpanModel(BaseModel):
    start: int
    length: int
    example_id: int
    branch: int  # -1 marks the prefix
    kind: str
    role: str
    weight: float


class LinearizeResponse(BaseModel):
    total_len: int
    spans: List[SpanModel]


class MaskRequest(BaseModel):
    trees: List[TreeModel]
    cap: int = 4096


class MaskResponse(BaseModel):
    total_len: int
    example_starts: List[int]
    packed_rows_b64: str  # row-major bit-packed mask, base64


# -- packing ---------------------------------------------------------------

class CandidateModel(BaseModel):
    id: str
    text_tokens: int = Field(ge=1)
    crops: int = Field(default=0, ge=0)


class BudgetModel(BaseModel):
    max_tokens: int = 16384
    max_crops: int = 128
    crop_weight: int = 30
    quantum: int = 32
    pool_size: int = 48


class SolveRequest(BaseModel):
    candidates: List[CandidateModel]
    budget: BudgetModel = Field(default_factory=BudgetModel)


class PackedSequenceModel(BaseModel):
    ids: List[str]
    tokens: int
    quantized: int
    crops: int
    objective: int


class StreamRequest(BaseModel):
    candidates: List[CandidateModel]
    budget: BudgetModel = Field(default_factory=BudgetModel)


class StreamResponse(BaseModel):
    meta: dict
    sequences: List[PackedSequenceModel]
    summary: dict


class TruncateRequest(BaseModel):
    candidate: CandidateModel
    budget: BudgetModel = Field(default_factory=BudgetModel)


class TruncateResponse(BaseModel):
    candidate: CandidateModel
    truncated: bool


class QuantizeRequest(BaseModel):
    tokens: int
    quantum: int = 32


class QuantizeResponse(BaseModel):
    quantized: int


# -- weighting ---------------------------------------------------------------

class TokenWeightRequest(BaseModel):
    kind: Literal["video_caption", "pointing", "other"]
    n: int


class TokenWeightResponse(BaseModel):
    weight: float


class GradScaleRequest(BaseModel):
    counts: List[int]


class GradScaleResponse(BaseModel):
    scale: float


# -- metrics --------------------------------------------------------------------

class GtFrameModel(BaseModel):
    t: float
    runs: List[int]


class GtObjectModel(BaseModel):
    id: int
    frames: List[GtFrameModel]


class GtVideoModel(BaseModel):
    video: str
    size: List[int]  # [height, width]
    objects: List[GtObjectModel]


class PredVideoModel(BaseModel):
    video: str
    answer: str


class PointsEvalRequest(BaseModel):
    gt: List[GtVideoModel]
    pred: List[PredVideoModel]
    window_s: float = 1.5
    micro: bool = False


class TracksEvalRequest(BaseModel):
    gt: List[GtVideoModel]
    pred: List[PredVideoModel]
    eval_fps: float = 1.0


class CountGtModel(BaseModel):
    video: str
    count: int


class CountPredModel(BaseModel):
    video: str
    answer: Optional[str] = None
    count: Optional[int] = None


class CountEvalRequest(BaseModel):
    gt: List[CountGtModel]
    pred: List[CountPredModel]


class CaptionSideModel(BaseModel):
    video: str
    statements: List[str]
    supported: List[bool]


class CaptionEvalRequest(BaseModel):
    gt: List[CaptionSideModel]
    pred: List[CaptionSideModel]


class EvalResponse(BaseModel):
    meta: dict
    aggregate: dict
    per_example: List[dict]


class CloseAccuracyRequest(BaseModel):
    pairs: List[List[int]]  # [pred, gt] pairs


class CloseAccuracyResponse(BaseModel):
    close: List[bool]
    exact: List[bool]
    close_accuracy: float
    exact_accuracy: float


class BattleModel(BaseModel):
    a: str
    b: str
    outcome: Literal["a", "b", "tie"]


class EloRequest(BaseModel):
    battles: List[BattleModel]
    rounds: int = 1000
    seed: int = 0


class EloEntryModel(BaseModel):
    model: str
    rating: float
    ci_low: float
    ci_high: float
    rank: int


class EloResponse(BaseModel):
    meta: dict
    leaderboard: List[EloEntryModel]
    skipped_rounds: int
    battles: int


# -- filters ------------------------------------------------------------------

class VideoStatsModel(BaseModel):
    id: str
    duration: float = 1.0
    w: int = 1
    h: int = 1
    bits: float = 1.0
    keywords: List[str] = Field(default_factory=list)
    segments: float = 0.0


class InformativenessRequest(BaseModel):
    videos: List[VideoStatsModel]


class DiverseRequest(BaseModel):
    videos: List[VideoStatsModel]
    target_n: int
    chunk: int = 1000
    seed: int = 0


class EmbeddingModel(BaseModel):
    id: str
    frames: List[List[float]]


class DecontaminateRequest(BaseModel):
    pool: List[EmbeddingModel]
    eval: List[EmbeddingModel]
    threshold: float = 0.95
    frames_per_video: int = 8


class SplitClipsRequest(BaseModel):
    density: List[float]
    min_s: int = 10
    max_s: int = 30


class RleMaskModel(BaseModel):
    height: int
    width: int
    runs: List[int]


class TrackPointRequest(BaseModel):
    mask: RleMaskModel
    alpha: float = 0.5


class GaussianPointRequest(BaseModel):
    mask: RleMaskModel
    sigma_frac: float = 1.0 / 6.0
    seed: int = 0
    max_tries: int = 1000


class PointResponse(BaseModel):
    px: int
    py: int


class SamPolicyRequest(BaseModel):
    bbox_iou: float
    mask_outside_fraction: float
    track_mean_iou: float
    reprompt_iou: float = 0.5
    outside_threshold: float = 0.2
    drop_iou: float = 0.5


class SamPolicyResponse(BaseModel):
    decision: Literal["keep", "reprompt", "drop_track"]


class GroundingDumpRequest(BaseModel):
    records: List[dict]
    kind_hint: Optional[Literal["points", "tracks"]] = None
    lenient: bool = False


class HealthResponse(BaseModel):
    status: str
    version: str
