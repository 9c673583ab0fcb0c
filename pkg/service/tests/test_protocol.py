import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from guidance_service.app import create_app
from guidance_service.config import ServiceConfig
from guidance_service.wire import decode_tensor, encode_tensor

FIXTURES = Path(__file__).parent / "fixtures" / "protocol_suite.json"


@pytest.fixture(scope="module")
def client():
    config = ServiceConfig(mode="mock", latent_hw=16, d_h=64, seed=0)
    return TestClient(create_app(config))


def make_request(seed, shape=(16, 16, 3), t=500, prompt="a red cube",
                 view="front view", cfg=7.5):
    rng = np.random.default_rng(seed)
    return {
        "prompt": prompt,
        "view_descriptor": view,
        "t": t,
        "x_t": encode_tensor(rng.standard_normal(shape)),
        "cfg_scale": cfg,
    }


class TestHealth:
    def test_handshake_fields(self, client):
        resp = client.get("/v1/health")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["ok"] is True
        assert doc["model_id"] == "mock-denoiser"
        assert doc["latent_hw"] == 16
        assert doc["d_h"] == 64

    def test_consistent_across_calls(self, client):
        docs = [client.get("/v1/health").json() for _ in range(3)]
        assert docs[0] == docs[1] == docs[2]


class TestPredictNoise:
    def test_shape_contract(self, client):
        for shape in [(16, 16, 3), (4, 16, 16), (8, 8)]:
            resp = client.post("/v1/predict_noise", json=make_request(1, shape=shape))
            assert resp.status_code == 200
            epsilon = decode_tensor(resp.json()["epsilon"])
            assert epsilon.shape == shape

    def test_determinism_byte_identical(self, client):
        body = make_request(2)
        first = client.post("/v1/predict_noise", json=body)
        second = client.post("/v1/predict_noise", json=body)
        assert first.content == second.content

    def test_prompt_sensitivity(self, client):
        a = client.post("/v1/predict_noise", json=make_request(3, prompt="a red cube"))
        b = client.post("/v1/predict_noise", json=make_request(3, prompt="a blue cube"))
        ea = decode_tensor(a.json()["epsilon"])
        eb = decode_tensor(b.json()["epsilon"])
        assert not np.array_equal(ea, eb)

    def test_view_descriptor_feeds_conditioning(self, client):
        a = client.post("/v1/predict_noise", json=make_request(4, view="front view"))
        b = client.post("/v1/predict_noise", json=make_request(4, view="back view"))
        assert a.content != b.content

    def test_cfg_zero_is_unconditional(self, client):
        # cfg 0 ignores the prompt entirely
        a = client.post("/v1/predict_noise",
                        json=make_request(5, prompt="a red cube", cfg=0.0))
        b = client.post("/v1/predict_noise",
                        json=make_request(5, prompt="something else", cfg=0.0))
        assert a.content == b.content

    def test_cfg_combination_formula(self, client):
        uncond = decode_tensor(
            client.post("/v1/predict_noise", json=make_request(6, cfg=0.0)).json()["epsilon"]
        )
        cond = decode_tensor(
            client.post("/v1/predict_noise", json=make_request(6, cfg=1.0)).json()["epsilon"]
        )
        scaled = decode_tensor(
            client.post("/v1/predict_noise", json=make_request(6, cfg=7.5)).json()["epsilon"]
        )
        expected = uncond + 7.5 * (cond - uncond)
        assert np.allclose(scaled, expected, atol=1e-4)

    def test_malformed_tensor_rejected(self, client):
        body = make_request(7)
        body["x_t"]["shape"] = [5, 5, 5]
        resp = client.post("/v1/predict_noise", json=body)
        assert resp.status_code == 400


class TestEncodeText:
    def test_repeatable(self, client):
        a = client.post("/v1/encode_text", json={"text": "red car"})
        b = client.post("/v1/encode_text", json={"text": "red car"})
        assert a.status_code == 200
        assert a.json() == b.json()

    def test_unit_norm(self, client):
        vec = np.array(client.post("/v1/encode_text", json={"text": "x"}).json()["embedding"])
        assert vec.shape == (64,)
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-6

    def test_empty_rejected(self, client):
        assert client.post("/v1/encode_text", json={"text": "  "}).status_code == 400

    def test_matches_engine_pseudo_embedding(self, client):
        semsplat_providers = pytest.importorskip("semsplat.semantic.providers")
        vec = np.array(
            client.post("/v1/encode_text", json={"text": "red car"}).json()["embedding"]
        )
        expected = semsplat_providers.pseudo_embedding("red car", 64, seed=0)
        assert np.allclose(vec, expected, atol=1e-12)


class TestRecordedSuite:
    """Replays the committed request/response fixtures byte-for-byte."""

    def test_matches_recorded_responses(self, client):
        suite = json.loads(FIXTURES.read_text())
        for case in suite["cases"]:
            resp = client.post(case["endpoint"], json=case["request"])
            assert resp.status_code == case["status"]
            if case["status"] == 200:
                assert resp.json() == case["response"], case["name"]

    def test_wire_roundtrip_lossless(self):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((3, 7, 2)).astype(np.float32)
        assert np.array_equal(decode_tensor(encode_tensor(arr)), arr)
