import base64

import pytest
from starlette.testclient import TestClient

from mmforge.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


POINTS_EXAMPLE = (
    '<points coords="1 1 555 169;2 3 649 154 4 709 162;'
    '5 5 758 175 6 808 183 7 852 187">txt</points>'
)


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestGrounding:
    def test_parse_roundtrip(self, client):
        r = client.post("/grounding/parse", json={"text": POINTS_EXAMPLE})
        assert r.status_code == 200
        body = r.json()
        assert body["count"] == 7
        assert body["canonical"] == POINTS_EXAMPLE
        r2 = client.post("/grounding/serialize", json={"block": body["block"]})
        assert r2.json()["text"] == POINTS_EXAMPLE

    def test_error_name_in_body(self, client):
        r = client.post("/grounding/parse", json={"text": "nope"})
        assert r.status_code == 422
        assert r.json()["error"] == "MalformedSyntax"

    def test_kind_mismatch(self, client):
        r = client.post(
            "/grounding/parse", json={"text": POINTS_EXAMPLE, "kind_hint": "tracks"}
        )
        assert r.status_code == 422
        assert r.json()["error"] == "KindMismatch"

    def test_lenient_reports_violations(self, client):
        r = client.post(
            "/grounding/parse",
            json={"text": '<points coords="1 1 2000 3">t</points>', "lenient": True},
        )
        assert r.status_code == 200
        assert r.json()["violations"] == {"coord_range": 1}

    def test_normalize(self, client):
        r = client.post(
            "/grounding/normalize", json={"px": 333, "py": 250, "width": 1000, "height": 500}
        )
        assert r.json() == {"x": 333, "y": 500}

    def test_align(self, client):
        r = client.post(
            "/grounding/align",
            json={"text": '<tracks coords="1.2 1 5 5">t</tracks>', "grid_fps": 2.0, "tolerance_s": 0.25},
        )
        body = r.json()
        assert body["aligned"][0]["slot"] == 2
        assert body["aligned"][0]["t"] == 1.0


class TestGeometry:
    def test_sample(self, client):
        r = client.post("/geometry/sample", json={"duration_s": 10.0})
        assert len(r.json()["timestamps"]) == 21

    def test_tracking_sample(self, client):
        r = client.post("/geometry/sample", json={"duration_s": 400.0, "tracking": True})
        assert r.json()["timestamps"][-1] == 63.5

    def test_pooled_grid(self, client):
        r = client.post("/geometry/pooled-grid", json={"patches_per_side": 27, "pool": 3})
        assert r.json() == {"rows": 9, "cols": 9, "tokens": 81}

    def test_slowfast(self, client):
        r = client.post("/geometry/slowfast-periodic", json={"frame_count": 200})
        assert r.json()["periodicity"] == 2
        r = client.post(
            "/geometry/slowfast-scored",
            json={"scores": [1, 9, 2, 8, 3, 7, 4, 6], "slow_count": 4, "effective_fps": 0.5},
        )
        assert r.json()["slow_indices"] == [1, 3, 5, 7]

    def test_crops(self, client):
        r = client.post("/geometry/crops", json={"width": 378, "height": 378})
        assert r.json()["total_crops"] == 2


class TestTrees:
    def test_linearize(self, client):
        tree = {
            "prefix": [{"kind": "visual", "count": 83}],
            "branches": [
                [{"role": "user", "token_count": 4}, {"role": "assistant", "token_count": 6, "loss_weight": 1.0}],
                [{"role": "user", "token_count": 5}, {"role": "assistant", "token_count": 7, "loss_weight": 1.0}],
            ],
        }
        r = client.post("/trees/linearize", json={"tree": tree})
        assert r.json()["total_len"] == 105

    def test_mask_blob(self, client):
        tree = {
            "prefix": [{"kind": "visual", "count": 4}],
            "branches": [[{"role": "user", "token_count": 2}, {"role": "assistant", "token_count": 2, "loss_weight": 1.0}]],
        }
        r = client.post("/trees/mask", json={"trees": [tree, tree]})
        body = r.json()
        assert body["total_len"] == 16
        assert body["example_starts"] == [0, 8]
        blob = base64.b64decode(body["packed_rows_b64"])
        from mmforge.trees import read_mask_export

        mask, starts = read_mask_export(blob)
        assert mask.shape == (16, 16)
        assert not mask[8:, :8].any()


class TestPacking:
    def test_solve(self, client):
        r = client.post(
            "/pack/solve",
            json={
                "candidates": [
                    {"id": "A", "text_tokens": 50, "crops": 1},
                    {"id": "B", "text_tokens": 60, "crops": 2},
                    {"id": "C", "text_tokens": 30, "crops": 0},
                ],
                "budget": {"max_tokens": 128, "max_crops": 2, "crop_weight": 30, "quantum": 32},
            },
        )
        assert r.json()["ids"] == ["B", "C"]
        assert r.json()["objective"] == 150

    def test_stream_summary(self, client):
        cands = [{"id": f"e{i}", "text_tokens": 4096, "crops": 32} for i in range(48)]
        r = client.post("/pack/stream", json={"candidates": cands})
        body = r.json()
        assert body["summary"]["mean_examples_per_sequence"] == 4.0
        assert all(s["quantized"] <= 16384 for s in body["sequences"])

    def test_infeasible_409_vs_422(self, client):
        r = client.post(
            "/pack/solve",
            json={
                "candidates": [{"id": "big", "text_tokens": 999999, "crops": 0}],
                "budget": {},
            },
        )
        assert r.status_code == 422
        assert r.json()["error"] == "InfeasibleCandidate"

    def test_truncate(self, client):
        r = client.post(
            "/pack/truncate",
            json={"candidate": {"id": "long", "text_tokens": 20000, "crops": 0}, "budget": {}},
        )
        assert r.json()["truncated"] is True
        assert r.json()["candidate"]["text_tokens"] == 16384


class TestWeights:
    def test_token(self, client):
        assert client.post("/weights/token", json={"kind": "other", "n": 16}).json()["weight"] == 1.0
        assert client.post("/weights/token", json={"kind": "video_caption", "n": 9}).json()["weight"] == 0.1

    def test_grad_scale(self, client):
        assert client.post("/weights/grad-scale", json={"counts": [0, 200]}).json()["scale"] == 100.0

    def test_all_zero(self, client):
        r = client.post("/weights/grad-scale", json={"counts": [0, 0]})
        assert r.status_code == 422
        assert r.json()["error"] == "AllZero"


class TestMetricsEndpoints:
    def test_close_accuracy(self, client):
        r = client.post("/metrics/close-accuracy", json={"pairs": [[22, 20], [23, 20], [7, 7]]})
        body = r.json()
        assert body["close"] == [True, False, True]
        assert body["exact_accuracy"] == pytest.approx(1 / 3)

    def test_elo_disconnected_is_409(self, client):
        battles = [
            {"a": "a", "b": "b", "outcome": "a"},
            {"a": "a", "b": "b", "outcome": "b"},
            {"a": "c", "b": "d", "outcome": "a"},
            {"a": "c", "b": "d", "outcome": "b"},
        ]
        r = client.post("/metrics/elo", json={"battles": battles, "rounds": 1})
        assert r.status_code == 409
        assert r.json()["error"] == "DisconnectedGraph"

    def test_points_eval(self, client):
        gt = [
            {
                "video": "v0",
                "size": [10, 10],
                "objects": [
                    {"id": 1, "frames": [{"t": 0.0, "runs": [0, 100]}]}
                ],
            }
        ]
        pred = [{"video": "v0", "answer": '<points coords="0.0 1 500 500">obj</points>'}]
        r = client.post("/metrics/points", json={"gt": gt, "pred": pred})
        assert r.json()["aggregate"]["f1"] == 1.0

    def test_caption_eval(self, client):
        gt = [{"video": "v", "statements": ["a", "b"], "supported": [True, False]}]
        pred = [{"video": "v", "statements": ["x"], "supported": [True]}]
        r = client.post("/metrics/caption", json={"gt": gt, "pred": pred})
        agg = r.json()["aggregate"]
        assert agg["precision"] == 1.0
        assert agg["recall"] == 0.5


class TestFilterEndpoints:
    def test_informativeness(self, client):
        videos = [
            {"id": f"v{i}", "duration": 1, "w": 10, "h": 10, "bits": b}
            for i, b in enumerate([0.001, 1000, 1000, 1000, 1000])
        ]
        r = client.post("/filters/informativeness", json={"videos": videos})
        assert r.json()["removed"] == ["v0"]

    def test_decontaminate(self, client):
        pool = [{"id": "p", "frames": [[1.0, 0.0]]}]
        evals = [{"id": "e", "frames": [[1.0, 0.0]]}]
        r = client.post("/filters/decontaminate", json={"pool": pool, "eval": evals})
        assert r.json()["removed"] == ["p"]

    def test_sam_policy(self, client):
        r = client.post(
            "/filters/sam-policy",
            json={"bbox_iou": 0.9, "mask_outside_fraction": 0.25, "track_mean_iou": 0.8},
        )
        assert r.json()["decision"] == "reprompt"

    def test_gaussian_point_deterministic(self, client):
        mask = {"height": 9, "width": 9, "runs": [0, 81]}
        a = client.post("/filters/gaussian-point", json={"mask": mask, "seed": 5}).json()
        b = client.post("/filters/gaussian-point", json={"mask": mask, "seed": 5}).json()
        assert a == b
