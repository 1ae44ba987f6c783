"""HTTP service exposing the toolkit.

Error mapping: domain errors raised by the core surface as JSON bodies
{"error": <class name>, "detail": <message>}. Input-shaped problems return
422, solver/metric failures (disconnected battle graph, degenerate fits)
return 409. The CLI and the bindings translate these back into exit codes
and typed exceptions by the error name.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, grounding, reports
from .. import filters as data_filters
from .. import geometry, packing, trees, weighting
from ..errors import DegenerateWins, DisconnectedGraph, MmforgeError
from ..metrics import close_accuracy, exact_accuracy
from ..rle import RleMask
from . import schemas as s

_CONFLICT_ERRORS = (DisconnectedGraph, DegenerateWins)


def _block_response(block: grounding.GroundingBlock, violations=None) -> s.ParseResponse:
    return s.ParseResponse(
        block=s.BlockModel(**reports.block_to_json(block)),
        count=block.count(),
        canonical=grounding.serialize(block),
        violations=violations,
    )


def _to_block(model: s.BlockModel) -> grounding.GroundingBlock:
    return reports.block_from_json(model.model_dump())


def _sampler_config(model: s.SamplerConfigModel) -> geometry.SamplerConfig:
    return geometry.SamplerConfig(**model.model_dump())


def _budget(model: s.BudgetModel) -> packing.PackBudget:
    return packing.PackBudget(**model.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(title="mmforge", version=__version__)

    @app.exception_handler(MmforgeError)
    async def mmforge_error_handler(_: Request, err: MmforgeError):
        status = 409 if isinstance(err, _CONFLICT_ERRORS) else 422
        return JSONResponse(
            status_code=status, content={"error": err.name, "detail": str(err)}
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(_: Request, err: ValueError):
        return JSONResponse(
            status_code=422, content={"error": "ValueError", "detail": str(err)}
        )

    @app.get("/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(status="ok", version=__version__)

    # -- grounding ---------------------------------------------------------

    @app.post(
        "/grounding/parse",
        response_model=s.ParseResponse,
        response_model_exclude_none=True,
    )
    def parse(req: s.ParseRequest):
        if req.lenient:
            block, rep = grounding.parse_lenient(req.text, kind_hint=req.kind_hint)
            return _block_response(block, violations=rep.violations)
        return _block_response(grounding.parse(req.text, kind_hint=req.kind_hint))

    @app.post("/grounding/serialize", response_model=s.SerializeResponse)
    def serialize(req: s.SerializeRequest):
        return s.SerializeResponse(text=grounding.serialize(_to_block(req.block)))

    @app.post("/grounding/count", response_model=s.CountResponse)
    def count(req: s.CountRequest):
        if req.text is not None:
            block = grounding.parse(req.text)
        elif req.block is not None:
            block = _to_block(req.block)
        else:
            raise grounding.MalformedSyntax("provide either text or block")
        return s.CountResponse(count=block.count())

    @app.post("/grounding/normalize", response_model=s.NormalizeResponse)
    def normalize(req: s.NormalizeRequest):
        x, y = grounding.normalize_point(req.px, req.py, req.width, req.height)
        return s.NormalizeResponse(x=x, y=y)

    @app.post("/grounding/denormalize", response_model=s.DenormalizeResponse)
    def denormalize(req: s.DenormalizeRequest):
        px, py = grounding.denormalize_point(req.x, req.y, req.width, req.height)
        return s.DenormalizeResponse(px=px, py=py)

    @app.post("/grounding/align", response_model=s.AlignResponse)
    def align(req: s.AlignRequest):
        if req.text is not None:
            block = grounding.parse(req.text)
        elif req.block is not None:
            block = _to_block(req.block)
        else:
            raise grounding.MalformedSyntax("provide either text or block")
        result = grounding.align_to_frames(block, req.grid_fps, req.tolerance_s)
        aligned = [
            s.AlignedFrame(
                slot=slot,
                t=result.slot_seconds(slot),
                points=[s.PointModel(id=p.object_id, x=p.x, y=p.y) for p in pts],
            )
            for slot, pts in sorted(result.aligned.items())
        ]
        unaligned = [
            s.FrameModel(
                t=locus.as_seconds if locus.is_time else None,
                image=None if locus.is_time else locus.value,
                points=[s.PointModel(id=p.object_id, x=p.x, y=p.y) for p in pts],
            )
            for locus, pts in result.unaligned
        ]
        return s.AlignResponse(aligned=aligned, unaligned=unaligned)

    @app.post("/grounding/dump")
    def dump(req: s.GroundingDumpRequest):
        return reports.grounding_dump(req.records, req.kind_hint, req.lenient)

    # -- geometry ------------------------------------------------------------

    @app.post("/geometry/sample", response_model=s.SampleResponse)
    def sample(req: s.SampleRequest):
        cfg = _sampler_config(req.config)
        fn = geometry.tracking_timestamps if req.tracking else geometry.sample_timestamps
        plan = fn(req.duration_s, cfg)
        return s.SampleResponse(
            timestamps=list(plan.timestamps),
            pathway=list(plan.pathway),
            periodicity=plan.periodicity,
        )

    @app.post("/geometry/crops", response_model=s.CropResponse)
    def crops(req: s.CropRequest):
        plan = geometry.plan_crops(req.width, req.height, _sampler_config(req.config))
        return s.CropResponse(
            rows=plan.grid[0],
            cols=plan.grid[1],
            includes_global_crop=plan.includes_global_crop,
            resize_to=list(plan.resize_to),
            retained=plan.retained,
            tokens_per_crop=plan.tokens_per_crop,
            total_crops=plan.total_crops,
        )

    @app.post("/geometry/pooled-grid", response_model=s.PooledGridResponse)
    def pooled(req: s.PooledGridRequest):
        grid = geometry.pooled_grid(req.patches_per_side, req.pool)
        return s.PooledGridResponse(rows=grid.rows, cols=grid.cols, tokens=grid.tokens)

    @app.post("/geometry/slowfast-periodic", response_model=s.SlowFastPeriodicResponse)
    def slowfast_periodic(req: s.SlowFastPeriodicRequest):
        p, flags = geometry.slowfast_periodic(req.frame_count)
        return s.SlowFastPeriodicResponse(periodicity=p, pathway=list(flags))

    @app.post("/geometry/slowfast-scored", response_model=s.SlowFastScoredResponse)
    def slowfast_scored(req: s.SlowFastScoredRequest):
        slow = geometry.slowfast_scored(req.scores, req.slow_count, req.effective_fps)
        return s.SlowFastScoredResponse(slow_indices=list(slow))

    # -- message trees ------------------------------------------------------

    def _tree(model: s.TreeModel) -> trees.MessageTree:
        return trees.build_tree(
            [(p.kind, p.count) for p in model.prefix],
            [[(m.role, m.token_count, m.loss_weight) for m in b] for b in model.branches],
        )

    @app.post("/trees/linearize", response_model=s.LinearizeResponse)
    def linearize(req: s.LinearizeRequest):
        lin = trees.linearize(_tree(req.tree))
        return s.LinearizeResponse(
            total_len=lin.total_len,
            spans=[
                s.SpanModel(
                    start=sp.start,
                    length=sp.length,
                    example_id=sp.example_id,
                    branch=sp.branch,
                    kind=sp.kind,
                    role=sp.role,
                    weight=sp.weight,
                )
                for sp in lin.spans
            ],
        )

    @app.post("/trees/mask", response_model=s.MaskResponse)
    def mask(req: s.MaskRequest):
        packed = trees.PackedLinearization(
            [trees.linearize(_tree(t), example_id=i) for i, t in enumerate(req.trees)]
        )
        blob = trees.export_mask(packed, cap=req.cap)
        return s.MaskResponse(
            total_len=packed.total_len,
            example_starts=list(packed.example_starts),
            packed_rows_b64=base64.b64encode(blob).decode("ascii"),
        )

    # -- packing ---------------------------------------------------------------

    @app.post("/pack/quantize", response_model=s.QuantizeResponse)
    def quantize(req: s.QuantizeRequest):
        return s.QuantizeResponse(quantized=packing.quantize(req.tokens, req.quantum))

    @app.post("/pack/solve", response_model=s.PackedSequenceModel)
    def solve(req: s.SolveRequest):
        pool = [
            packing.PackCandidate(c.id, c.text_tokens, c.crops, arrival=i)
            for i, c in enumerate(req.candidates)
        ]
        seq = packing.solve(pool, _budget(req.budget))
        return s.PackedSequenceModel(
            ids=list(seq.ids),
            tokens=seq.tokens,
            quantized=seq.quantized,
            crops=seq.crops,
            objective=seq.objective,
        )

    @app.post("/pack/stream", response_model=s.StreamResponse)
    def stream(req: s.StreamRequest):
        report = reports.pack_manifest(
            [c.model_dump() for c in req.candidates], **req.budget.model_dump()
        )
        return s.StreamResponse(**report)

    @app.post("/pack/truncate", response_model=s.TruncateResponse)
    def truncate(req: s.TruncateRequest):
        cand = packing.PackCandidate(
            req.candidate.id, req.candidate.text_tokens, req.candidate.crops
        )
        out = packing.truncate(cand, _budget(req.budget))
        return s.TruncateResponse(
            candidate=s.CandidateModel(
                id=out.id, text_tokens=out.text_tokens, crops=out.crops
            ),
            truncated=out.truncated,
        )

    # -- weighting ---------------------------------------------------------------

    @app.post("/weights/token", response_model=s.TokenWeightResponse)
    def token_weight(req: s.TokenWeightRequest):
        return s.TokenWeightResponse(weight=weighting.token_weight(req.kind, req.n))

    @app.post("/weights/grad-scale", response_model=s.GradScaleResponse)
    def grad_scale(req: s.GradScaleRequest):
        return s.GradScaleResponse(scale=weighting.grad_scale(req.counts))

    # -- metrics ---------------------------------------------------------------------

    @app.post("/metrics/close-accuracy", response_model=s.CloseAccuracyResponse)
    def close_acc(req: s.CloseAccuracyRequest):
        close = [close_accuracy(p, g) for p, g in req.pairs]
        exact = [exact_accuracy(p, g) for p, g in req.pairs]
        n = max(len(req.pairs), 1)
        return s.CloseAccuracyResponse(
            close=close,
            exact=exact,
            close_accuracy=sum(close) / n,
            exact_accuracy=sum(exact) / n,
        )

    @app.post("/metrics/points", response_model=s.EvalResponse)
    def eval_points(req: s.PointsEvalRequest):
        return reports.eval_points(
            [g.model_dump() for g in req.gt],
            [p.model_dump() for p in req.pred],
            window_s=req.window_s,
            micro=req.micro,
        )

    @app.post("/metrics/tracks", response_model=s.EvalResponse)
    def eval_tracks(req: s.TracksEvalRequest):
        return reports.eval_tracks(
            [g.model_dump() for g in req.gt],
            [p.model_dump() for p in req.pred],
            eval_fps=req.eval_fps,
        )

    @app.post("/metrics/count", response_model=s.EvalResponse)
    def eval_count(req: s.CountEvalRequest):
        return reports.eval_count(
            [g.model_dump() for g in req.gt],
            [p.model_dump(exclude_none=True) for p in req.pred],
        )

    @app.post("/metrics/caption", response_model=s.EvalResponse)
    def eval_caption(req: s.CaptionEvalRequest):
        return reports.eval_caption(
            [g.model_dump() for g in req.gt],
            [p.model_dump() for p in req.pred],
        )

    @app.post("/metrics/elo", response_model=s.EloResponse)
    def elo(req: s.EloRequest):
        report = reports.elo_leaderboard(
            [b.model_dump() for b in req.battles], rounds=req.rounds, seed=req.seed
        )
        return s.EloResponse(**report)

    # -- filters ---------------------------------------------------------------------

    @app.post("/filters/informativeness")
    def informativeness(req: s.InformativenessRequest):
        return reports.informativeness_report([v.model_dump() for v in req.videos])

    @app.post("/filters/diverse")
    def diverse(req: s.DiverseRequest):
        return reports.diverse_report(
            [v.model_dump() for v in req.videos],
            target_n=req.target_n,
            chunk=req.chunk,
            seed=req.seed,
        )

    @app.post("/filters/decontaminate")
    def decontaminate(req: s.DecontaminateRequest):
        return reports.decontaminate_report(
            [e.model_dump() for e in req.pool],
            [e.model_dump() for e in req.eval],
            threshold=req.threshold,
            frames_per_video=req.frames_per_video,
        )

    @app.post("/filters/split-clips")
    def split_clips(req: s.SplitClipsRequest):
        return reports.split_clips_report(req.density, min_s=req.min_s, max_s=req.max_s)

    @app.post("/filters/track-point", response_model=s.PointResponse)
    def track_point(req: s.TrackPointRequest):
        geom = data_filters.MaskGeometry.from_mask(
            RleMask(req.mask.height, req.mask.width, req.mask.runs)
        )
        px, py = data_filters.extract_track_point(geom, alpha=req.alpha)
        return s.PointResponse(px=px, py=py)

    @app.post("/filters/gaussian-point", response_model=s.PointResponse)
    def gaussian_point(req: s.GaussianPointRequest):
        geom = data_filters.MaskGeometry.from_mask(
            RleMask(req.mask.height, req.mask.width, req.mask.runs)
        )
        px, py = data_filters.sample_gaussian_point(
            geom, sigma_frac=req.sigma_frac, seed=req.seed, max_tries=req.max_tries
        )
        return s.PointResponse(px=px, py=py)

    @app.post("/filters/sam-policy", response_model=s.SamPolicyResponse)
    def sam_policy(req: s.SamPolicyRequest):
        decision = data_filters.sam_prompt_policy(
            req.bbox_iou,
            req.mask_outside_fraction,
            req.track_mean_iou,
            reprompt_iou=req.reprompt_iou,
            outside_threshold=req.outside_threshold,
            drop_iou=req.drop_iou,
        )
        return s.SamPolicyResponse(decision=decision)

    return app


app = create_app()
