"""Command-line client for the mmforge service.

Every command reads/writes local JSONL files but routes its actual work
through the HTTP service: by default an in-process instance of the app (no
daemon needed), or a remote server via --server. Exit codes: 0 success,
1 usage error, 2 input-format error, 3 metric/solver failure. Machine output
goes only to --out files; human summaries go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Iterator, Sequence

import httpx

from . import __version__

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3


class UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageExit(message)


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class ServiceClient:
    """Thin HTTP client; in-process ASGI transport unless --server is given."""

    def __init__(self, server: str | None = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette's in-process client warns about httpx pinning;
                # irrelevant for local use
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                detail = f"{body.get('error', 'error')}: {body.get('detail', '')}"
            except Exception:
                detail = resp.text
            code = EXIT_INPUT if resp.status_code in (400, 422) else EXIT_SOLVER
            raise CliFailure(code, detail)
        return resp.json()

    def close(self) -> None:
        self._client.close()


def read_jsonl(path: str) -> Iterator[tuple[int, Any]]:
    p = Path(path)
    if not p.exists():
        raise CliFailure(EXIT_INPUT, f"{path}: no such file")
    with p.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as err:
                raise CliFailure(EXIT_INPUT, f"{path}:{lineno}: bad JSON ({err.msg})")


def load_records(path: str, required: Sequence[str]) -> list[dict]:
    records = []
    for lineno, rec in read_jsonl(path):
        if not isinstance(rec, dict):
            raise CliFailure(EXIT_INPUT, f"{path}:{lineno}: expected an object")
        for key in required:
            if key not in rec:
                raise CliFailure(EXIT_INPUT, f"{path}:{lineno}: missing field {key!r}")
        records.append(rec)
    return records


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str, lines: Sequence[Any]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(_dump(obj) + "\n")


def _info(message: str) -> None:
    print(message, file=sys.stderr)


# -- commands ------------------------------------------------------------------


def cmd_pack(args, client: ServiceClient) -> int:
    records = []
    for lineno, rec in read_jsonl(args.manifest):
        for key in ("id", "text_tokens", "crops"):
            if not isinstance(rec, dict) or key not in rec:
                raise CliFailure(EXIT_INPUT, f"{args.manifest}:{lineno}: missing field {key!r}")
        if rec["crops"] < 0 or rec["text_tokens"] < 1:
            raise CliFailure(
                EXIT_INPUT, f"{args.manifest}:{lineno}: bad token/crop counts"
            )
        records.append(rec)
    budget = {
        "max_tokens": args.max_tokens,
        "max_crops": args.max_crops,
        "crop_weight": args.crop_weight,
        "quantum": args.quantum,
        "pool_size": args.pool,
    }
    result = client.post(
        "/pack/stream",
        {"candidates": records, "budget": budget},
    )
    lines = [{"meta": result["meta"]}]
    lines.extend(result["sequences"])
    lines.append({"summary": result["summary"]})
    write_jsonl(args.out, lines)
    s = result["summary"]
    _info(
        f"packed {s['examples']} examples into {s['sequences']} sequences "
        f"(mean {s['mean_examples_per_sequence']:.2f}/seq, "
        f"token util {s['token_utilization']:.1%}, crop util {s['crop_utilization']:.1%})"
    )
    return EXIT_OK


def cmd_eval(args, client: ServiceClient) -> int:
    task = args.task
    if task == "points":
        gt = load_records(args.gt, ("video", "size", "objects"))
        pred = load_records(args.pred, ("video", "answer"))
        payload = {"gt": gt, "pred": pred, "window_s": args.window, "micro": args.micro}
        result = client.post("/metrics/points", payload)
    elif task == "tracks":
        gt = load_records(args.gt, ("video", "size", "objects"))
        pred = load_records(args.pred, ("video", "answer"))
        result = client.post(
            "/metrics/tracks", {"gt": gt, "pred": pred, "eval_fps": args.fps}
        )
    elif task == "count":
        gt = load_records(args.gt, ("video", "count"))
        pred = load_records(args.pred, ("video",))
        result = client.post("/metrics/count", {"gt": gt, "pred": pred})
    else:  # caption
        gt = load_records(args.gt, ("video", "statements", "supported"))
        pred = load_records(args.pred, ("video", "statements", "supported"))
        result = client.post("/metrics/caption", {"gt": gt, "pred": pred})
    lines = [{"meta": result["meta"]}, {"aggregate": result["aggregate"]}]
    lines.extend(result["per_example"])
    write_jsonl(args.out, lines)
    agg = dict(result["aggregate"])
    agg.pop("unmatched_ids", None)
    _info(f"eval {task}: " + ", ".join(f"{k}={v}" for k, v in sorted(agg.items())))
    unmatched = result["aggregate"].get("unmatched_ids") or []
    if unmatched:
        _info(f"warning: {len(unmatched)} unmatched ids excluded: {unmatched[:5]}...")
    return EXIT_OK


def cmd_elo(args, client: ServiceClient) -> int:
    battles = load_records(args.battles, ("a", "b", "outcome"))
    result = client.post(
        "/metrics/elo", {"battles": battles, "rounds": args.rounds, "seed": args.seed}
    )
    lines = [{"meta": result["meta"]}]
    lines.extend(result["leaderboard"])
    lines.append(
        {"summary": {"battles": result["battles"], "skipped_rounds": result["skipped_rounds"]}}
    )
    write_jsonl(args.out, lines)
    top = result["leaderboard"][:3]
    _info(
        "leaderboard: "
        + "; ".join(f"#{e['rank']} {e['model']} {e['rating']:.0f}" for e in top)
    )
    return EXIT_OK


def cmd_filter(args, client: ServiceClient) -> int:
    kind = args.filter
    if kind == "informativeness":
        videos = load_records(args.manifest, ("id", "duration", "w", "h", "bits"))
        result = client.post("/filters/informativeness", {"videos": videos})
        lines = [{"meta": result["meta"]}, {"stats": result["stats"]}]
        kept = set(result["kept"])
        lines.extend(
            {"id": row["id"], "score": row["score"], "kept": row["id"] in kept}
            for row in result["scores"]
        )
        write_jsonl(args.out, lines)
        st = result["stats"]
        _info(
            f"informativeness: kept {len(result['kept'])}/{len(videos)} "
            f"(mean={st['mean']:.6g}, std={st['std']:.6g}, threshold={st['threshold']:.6g})"
        )
    elif kind == "diverse":
        videos = load_records(args.manifest, ("id",))
        result = client.post(
            "/filters/diverse",
            {
                "videos": videos,
                "target_n": args.target,
                "chunk": args.chunk,
                "seed": args.seed,
            },
        )
        lines = [
            {"meta": result["meta"]},
            {"stats": {"entropy_trajectory": result["entropy_trajectory"]}},
        ]
        lines.extend({"id": vid} for vid in result["selected"])
        write_jsonl(args.out, lines)
        _info(f"diverse: selected {len(result['selected'])}/{len(videos)}")
    elif kind == "decontaminate":
        pool = load_records(args.pool, ("id", "frames"))
        evals = load_records(args.eval, ("id", "frames"))
        result = client.post(
            "/filters/decontaminate",
            {
                "pool": pool,
                "eval": evals,
                "threshold": args.threshold,
                "frames_per_video": args.frames_per_video,
            },
        )
        removed = set(result["removed"])
        lines = [{"meta": result["meta"]}]
        lines.extend({"id": r["id"], "removed": r["id"] in removed} for r in pool)
        write_jsonl(args.out, lines)
        _info(f"decontaminate: removed {len(result['removed'])}/{len(pool)}")
    else:  # split-clips
        records = load_records(args.density, ("density",))
        lines = []
        for rec in records:
            result = client.post(
                "/filters/split-clips",
                {"density": rec["density"], "min_s": args.min, "max_s": args.max},
            )
            if not lines:
                lines.append({"meta": result["meta"]})
            lines.append(
                {
                    "id": rec.get("id"),
                    "cuts": result["cuts"],
                    "clips": result["clips"],
                    "max_clip_density": result["max_clip_density"],
                }
            )
        write_jsonl(args.out, lines)
        _info(f"split-clips: processed {len(records)} videos")
    return EXIT_OK


def cmd_grounding(args, client: ServiceClient) -> int:
    records = load_records(args.input, ("id", "answer"))
    result = client.post(
        "/grounding/dump",
        {"records": records, "kind_hint": args.kind, "lenient": args.lenient},
    )
    lines = [{"meta": result["meta"]}]
    lines.extend(result["results"])
    write_jsonl(args.out, lines)
    ok = sum(1 for r in result["results"] if r["ok"])
    _info(f"grounding parse: {ok}/{len(records)} valid")
    return EXIT_OK


def cmd_serve(args, _client: ServiceClient | None = None) -> int:
    import uvicorn

    uvicorn.run("mmforge.service:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="mmforge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mmforge {__version__}")
    parser.add_argument(
        "--server", default=None, help="service URL (default: run in-process)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", help="pack a candidate manifest into budgeted sequences")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-tokens", type=int, default=16384)
    p.add_argument("--max-crops", type=int, default=128)
    p.add_argument("--crop-weight", type=int, default=30)
    p.add_argument("--quantum", type=int, default=32)
    p.add_argument("--pool", type=int, default=48)
    p.set_defaults(fn=cmd_pack)

    p = sub.add_parser("eval", help="run grounded-video metrics")
    p.add_argument("task", choices=("points", "tracks", "count", "caption"))
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fps", type=float, default=1.0, help="tracking eval grid fps")
    p.add_argument("--window", type=float, default=1.5, help="pointing time window (s)")
    p.add_argument("--micro", action="store_true", help="micro-average pointing F1")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("elo", help="fit a bootstrap Elo leaderboard from battles")
    p.add_argument("--battles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_elo)

    p = sub.add_parser("filter", help="run data-curation filters")
    fsub = p.add_subparsers(dest="filter", required=True)

    f = fsub.add_parser("informativeness")
    f.add_argument("--manifest", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(fn=cmd_filter)

    f = fsub.add_parser("diverse")
    f.add_argument("--manifest", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--target", type=int, required=True)
    f.add_argument("--chunk", type=int, default=1000)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(fn=cmd_filter)

    f = fsub.add_parser("decontaminate")
    f.add_argument("--pool", required=True)
    f.add_argument("--eval", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--threshold", type=float, default=0.95)
    f.add_argument("--frames-per-video", type=int, default=8)
    f.set_defaults(fn=cmd_filter)

    f = fsub.add_parser("split-clips")
    f.add_argument("--density", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--min", type=int, default=10)
    f.add_argument("--max", type=int, default=30)
    f.set_defaults(fn=cmd_filter)

    p = sub.add_parser("grounding", help="validate/convert grounding answers")
    gsub = p.add_subparsers(dest="grounding", required=True)
    g = gsub.add_parser("parse")
    g.add_argument("--input", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--kind", choices=("points", "tracks"), default=None)
    g.add_argument("--lenient", action="store_true")
    g.set_defaults(fn=cmd_grounding)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageExit:
        return EXIT_USAGE
    if args.fn is cmd_serve:
        return cmd_serve(args)
    client = ServiceClient(args.server)
    try:
        return args.fn(args, client)
    except CliFailure as err:
        print(f"mmforge: {err}", file=sys.stderr)
        return err.code
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
