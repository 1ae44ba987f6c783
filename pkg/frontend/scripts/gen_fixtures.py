"""Generate the shared differential-parity corpus for the TypeScript client.

Inputs are synthesized with a fixed seed; expected outputs are produced by
the NATIVE side (the mmforge CLI where a file surface exists, direct library
calls otherwise) so the TypeScript bindings can be checked for zero
divergences. Everything lands in frontend/fixtures/.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[2]
FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
sys.path.insert(0, str(ROOT / "tests"))

from genutil import random_block, synthetic_workload  # noqa: E402

from mmforge import grounding  # noqa: E402
from mmforge.metrics import close_accuracy, exact_accuracy  # noqa: E402
from mmforge.weighting import grad_scale, token_weight  # noqa: E402

REFERENCE_POINTS = (
    '<points coords="1 1 555 169;2 3 649 154 4 709 162;'
    '5 5 758 175 6 808 183 7 852 187">txt</points>'
)
REFERENCE_TRACKS = (
    '<tracks coords="0.0 1 635 522;0.5 1 606 490 2 511 124;'
    '1.0 2 515 164;1.5 2 520 168">txt</tracks>'
)

MALFORMED_TEMPLATES = [
    "no element at all",
    '<points coords="1 1 2 3">unbalanced',
    '<points coords="1 1 2">bad arity</points>',
    '<points coords="1 1 2000 3">range</points>',
    '<points coords="2 1 2 3;1 2 4 5">order</points>',
    '<points coords="1 1 2 3 1 4 5">dup</points>',
    '<points coords="1.23 1 2 3">locus</points>',
    '<tracks coords="0.0 2 5 5 1 6 6">track order</tracks>',
]


def write_jsonl(path: Path, records) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return path


def run_cli(*args: str) -> None:
    subprocess.run(
        [sys.executable, "-m", "mmforge.cli", *args], check=True, cwd=ROOT,
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )


def grounding_corpus(rng: np.random.Generator) -> list[dict]:
    records = [
        {"id": "reference_points", "answer": REFERENCE_POINTS},
        {"id": "reference_tracks", "answer": REFERENCE_TRACKS},
        {"id": "empty", "answer": '<points coords="">none visible</points>'},
    ]
    for i in range(1000):
        records.append({"id": f"valid{i:04d}", "answer": grounding.serialize(random_block(rng))})
    for i, template in enumerate(MALFORMED_TEMPLATES * 12):
        records.append({"id": f"bad{i:03d}", "answer": template})
    return records


def main() -> None:
    rng = np.random.default_rng(91)

    corpus = grounding_corpus(rng)
    corpus_path = write_jsonl(FIXTURES / "grounding_corpus.jsonl", corpus)
    run_cli(
        "grounding", "parse",
        "--input", str(corpus_path),
        "--out", str(FIXTURES / "grounding_expected.jsonl"),
    )

    manifest = [
        {"id": c.id, "text_tokens": c.text_tokens, "crops": c.crops}
        for c in synthetic_workload(rng, n=150)
    ]
    manifest_path = write_jsonl(FIXTURES / "pack_manifest.jsonl", manifest)
    run_cli(
        "pack", "--manifest", str(manifest_path),
        "--out", str(FIXTURES / "pack_expected_default.jsonl"),
    )
    small = [
        {"id": f"s{i}", "text_tokens": int(rng.integers(1, 900)), "crops": int(rng.integers(0, 9))}
        for i in range(60)
    ]
    small_path = write_jsonl(FIXTURES / "pack_manifest_small.jsonl", small)
    run_cli(
        "pack", "--manifest", str(small_path),
        "--out", str(FIXTURES / "pack_expected_small.jsonl"),
        "--max-tokens", "2048", "--max-crops", "16", "--crop-weight", "11",
        "--quantum", "64", "--pool", "7",
    )

    weight_cases = []
    for kind in ("video_caption", "pointing", "other"):
        for n in [1, 2, 3, 4, 5, 7, 9, 16, 50, 333, 4096]:
            weight_cases.append({"kind": kind, "n": n, "weight": token_weight(kind, n)})
    write_jsonl(FIXTURES / "weights_expected.jsonl", weight_cases)

    scale_cases = []
    for _ in range(50):
        counts = rng.integers(0, 3000, size=int(rng.integers(1, 9))).tolist()
        if sum(counts) == 0:
            counts[0] = 1
        scale_cases.append({"counts": counts, "scale": grad_scale(counts)})
    write_jsonl(FIXTURES / "grad_scale_expected.jsonl", scale_cases)

    count_cases = []
    for _ in range(200):
        gt = int(rng.integers(0, 120))
        pred = gt + int(rng.integers(-8, 9))
        if pred < 0:
            pred = 0
        count_cases.append(
            {
                "pred": pred,
                "gt": gt,
                "close": close_accuracy(pred, gt),
                "exact": exact_accuracy(pred, gt),
            }
        )
    write_jsonl(FIXTURES / "close_accuracy_expected.jsonl", count_cases)

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
