from __future__ import annotations

import httpx
import pytest
from fastapi.testclient import TestClient

from scoring_shim.model import load_model
from scoring_shim.server import create_app
from scoring_shim.testing import launch_server


@pytest.fixture(scope="module")
def client():
    app = create_app(load_model("builtin:tiny"), max_concurrency=2)
    with TestClient(app) as test_client:
        yield test_client


def _score(client, prompt_plus_continuation):
    return client.post(
        "/v1/completions",
        json={
            "model": "builtin:tiny",
            "prompt": prompt_plus_continuation,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 1,
        },
    )


class TestScoringMode:
    def test_echo_scoring_shape(self, client):
        response = _score(client, "walk | hypernyms: [/INST] move,")
        assert response.status_code == 200
        choice = response.json()["choices"][0]
        assert choice["text"] == "walk | hypernyms: [/INST] move,"
        block = choice["logprobs"]
        assert len(block["tokens"]) == len(block["token_logprobs"]) == len(block["text_offset"])
        assert block["token_logprobs"][0] is None
        assert all(lp <= 0.0 for lp in block["token_logprobs"][1:])
        assert block["text_offset"][0] == 0
        # offsets + token lengths tile the text exactly
        reconstructed = "".join(block["tokens"])
        assert reconstructed == choice["text"]
        for token, offset in zip(block["tokens"], block["text_offset"]):
            assert choice["text"][offset:offset + len(token)] == token

    def test_scoring_is_deterministic_across_requests(self, client):
        first = _score(client, "score me twice").json()
        second = _score(client, "score me twice").json()
        assert first["choices"][0]["logprobs"] == second["choices"][0]["logprobs"]

    def test_max_tokens_zero_without_echo_is_an_error(self, client):
        response = client.post(
            "/v1/completions",
            json={"prompt": "x", "max_tokens": 0, "echo": False},
        )
        assert response.status_code == 400
        assert "error" in response.json()


class TestGenerationMode:
    def test_greedy_determinism_and_replication(self, client):
        payload = {
            "prompt": "walk, run, ",
            "max_tokens": 8,
            "temperature": 0.0,
            "n": 3,
            "logprobs": 1,
        }
        first = client.post("/v1/completions", json=payload).json()
        second = client.post("/v1/completions", json=payload).json()
        texts = [c["text"] for c in first["choices"]]
        assert len(texts) == 3
        assert len(set(texts)) == 1
        assert texts == [c["text"] for c in second["choices"]]

    def test_generated_text_excludes_prompt(self, client):
        response = client.post(
            "/v1/completions",
            json={"prompt": "some prompt ", "max_tokens": 5, "temperature": 0.0},
        ).json()
        choice = response["choices"][0]
        assert not choice["text"].startswith("some prompt ")

    def test_generation_offsets_start_at_prompt_end(self, client):
        prompt = "offsets start here:"
        response = client.post(
            "/v1/completions",
            json={"prompt": prompt, "max_tokens": 4, "temperature": 0.0, "logprobs": 1},
        ).json()
        block = response["choices"][0]["logprobs"]
        assert block["text_offset"][0] == len(prompt)

    def test_stop_sequence(self, client):
        free = client.post(
            "/v1/completions",
            json={"prompt": "q", "max_tokens": 30, "temperature": 0.0},
        ).json()["choices"][0]["text"]
        if len(free) > 2:
            stop = free[1]
            stopped = client.post(
                "/v1/completions",
                json={"prompt": "q", "max_tokens": 30, "temperature": 0.0, "stop": [stop]},
            ).json()["choices"][0]
            assert stop not in stopped["text"]
            assert stopped["finish_reason"] == "stop"

    def test_sampling_with_seed(self, client):
        payload = {
            "prompt": "sample ",
            "max_tokens": 6,
            "temperature": 1.0,
            "n": 2,
            "seed": 11,
        }
        first = client.post("/v1/completions", json=payload).json()
        second = client.post("/v1/completions", json=payload).json()
        assert [c["text"] for c in first["choices"]] == [c["text"] for c in second["choices"]]

    def test_usage_block(self, client):
        response = client.post(
            "/v1/completions",
            json={"prompt": "usage", "max_tokens": 3, "temperature": 0.0, "logprobs": 1},
        ).json()
        usage = response["usage"]
        assert usage["total_tokens"] == usage["prompt_tokens"] + usage["completion_tokens"]


class TestErrorPayloads:
    @pytest.mark.parametrize(
        "payload",
        [
            {"prompt": 42, "max_tokens": 1},
            {"prompt": "x", "max_tokens": -1},
            {"prompt": "x", "max_tokens": 1, "n": 0},
            {"prompt": "x", "max_tokens": 1, "temperature": -0.5},
        ],
    )
    def test_invalid_requests_get_protocol_errors(self, client, payload):
        response = client.post("/v1/completions", json=payload)
        assert response.status_code == 400
        body = response.json()
        assert body["error"]["type"] == "invalid_request_error"
        assert body["error"]["message"]


def test_health_endpoint(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_socket_server_end_to_end():
    with launch_server() as url:
        health = httpx.get(f"{url}/health", timeout=10.0)
        assert health.status_code == 200
        response = httpx.post(
            f"{url}/v1/completions",
            json={"prompt": "walk -> move,", "max_tokens": 0, "echo": True, "logprobs": 1},
            timeout=30.0,
        )
        assert response.status_code == 200
        block = response.json()["choices"][0]["logprobs"]
        assert block["token_logprobs"][0] is None
        assert all(lp <= 0.0 for lp in block["token_logprobs"][1:])
