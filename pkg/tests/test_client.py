from __future__ import annotations

import json
import math
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from taxokit.client import (
    Backend,
    CompletionParams,
    HttpBackend,
    MockBackend,
    ScoreCache,
    ScoreRecord,
    ScoringClient,
)
from taxokit.errors import BackendError, CapabilityError, ConfigurationError


def make_client(backend=None, **kwargs):
    return ScoringClient(backend or MockBackend(fallback="hash"), sleep=lambda _: None, **kwargs)


class TestMockBackend:
    def test_table_completion_lookup(self, tmp_path):
        table = tmp_path / "mock.jsonl"
        table.write_text(json.dumps({"prompt": "P", "text": "big cat,"}) + "\n")
        backend = MockBackend(table)
        out = backend.complete("P", CompletionParams())
        assert out[0].text == "big cat,"

    def test_greedy_num_completions_identical(self, tmp_path):
        table = tmp_path / "mock.jsonl"
        table.write_text(json.dumps({"prompt": "P", "text": "big cat,"}) + "\n")
        backend = MockBackend(table)
        out = backend.complete("P", CompletionParams(temperature=0.0, num_completions=3))
        assert len(out) == 3
        assert len({c.text for c in out}) == 1

    def test_table_score_lookup(self, tmp_path):
        table = tmp_path / "mock.jsonl"
        table.write_text(
            json.dumps({"prompt": "P", "continuation": "c,", "sum_logprob": -2.0, "token_count": 2})
            + "\n"
        )
        backend = MockBackend(table)
        assert backend.score("P", "c,") == (-2.0, 2)

    def test_strict_mode_raises_on_missing_key(self):
        backend = MockBackend()
        with pytest.raises(BackendError):
            backend.score("unknown", "c")
        with pytest.raises(BackendError):
            backend.complete("unknown", CompletionParams())

    def test_hash_fallback_is_deterministic_and_negative(self):
        a = MockBackend(fallback="hash")
        b = MockBackend(fallback="hash")
        s1 = a.score("some prompt", "some continuation")
        s2 = b.score("some prompt", "some continuation")
        assert s1 == s2
        assert s1[0] < 0
        assert s1[1] >= 1

    def test_bad_table_record(self, tmp_path):
        table = tmp_path / "mock.jsonl"
        table.write_text('{"prompt": "P"}\n')
        with pytest.raises(Exception):
            MockBackend(table)


class TestScoring:
    def test_perplexity_formula(self):
        backend = MockBackend()
        backend.add_score("p", "c", sum_logprob=-2.0, token_count=2)
        record = make_client(backend).score_continuation("p", "c")
        assert record.perplexity == pytest.approx(math.e, rel=1e-12)
        assert record.sum_logprob == -2.0
        assert record.token_count == 2

    def test_perplexity_invariant_holds(self):
        client = make_client()
        for i in range(50):
            record = client.score_continuation(f"prompt {i}", f"cont {i},")
            assert record.perplexity > 0
            expected = math.exp(-record.sum_logprob / record.token_count)
            assert record.perplexity == pytest.approx(expected, rel=1e-9)

    def test_empty_continuation_rejected(self):
        with pytest.raises(ConfigurationError):
            make_client().score_continuation("p", "")

    def test_capability_error_at_construction(self):
        backend = MockBackend(fallback="hash")
        backend.supports_logprobs = False
        with pytest.raises(CapabilityError):
            make_client(backend, require_logprobs=True)


class TestCache:
    def test_fresh_cache_stats(self):
        client = make_client()
        assert client.cache_stats().as_dict() == {"entries": 0, "hits": 0, "misses": 0}

    def test_miss_then_hit(self):
        client = make_client()
        first = client.score_continuation("p", "c")
        second = client.score_continuation("p", "c")
        assert first == second
        assert client.cache_stats().as_dict() == {"entries": 1, "hits": 1, "misses": 1}
        assert client.backend_calls == 1

    def test_disabled_cache_never_hits(self):
        client = make_client(cache=ScoreCache(None, enabled=False))
        client.score_continuation("p", "c")
        client.score_continuation("p", "c")
        stats = client.cache_stats()
        assert stats.hits == 0
        assert stats.entries == 0
        assert client.backend_calls == 2

    def test_persistence_across_clients(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        first = make_client(cache=ScoreCache(path))
        record = first.score_continuation("p", "c")
        warm = make_client(cache=ScoreCache(path))
        replay = warm.score_continuation("p", "c")
        assert replay == record
        assert warm.backend_calls == 0

    def test_compaction_on_load(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        entry = {"key": "k", "value": {"sum_logprob": -1.0, "token_count": 1}}
        path.write_text(json.dumps(entry) + "\n" + json.dumps(entry) + "\n")
        cache = ScoreCache(path)
        assert cache.stats.entries == 1
        assert len(path.read_text().splitlines()) == 1

    def test_completions_cached_by_params(self, tmp_path):
        table = tmp_path / "mock.jsonl"
        table.write_text(json.dumps({"prompt": "P", "text": "cat,"}) + "\n")
        client = make_client(MockBackend(table), cache=ScoreCache(tmp_path / "c.jsonl"))
        client.complete("P", CompletionParams(max_new_tokens=8))
        client.complete("P", CompletionParams(max_new_tokens=8))
        assert client.backend_calls == 1
        client.complete("P", CompletionParams(max_new_tokens=9))
        assert client.backend_calls == 2


class TestRetries:
    class FlakyBackend(Backend):
        backend_id = "flaky"

        def __init__(self, failures: int, retryable: bool = True):
            self.remaining = failures
            self.retryable = retryable
            self.calls = 0

        def score(self, prompt, continuation):
            self.calls += 1
            if self.remaining > 0:
                self.remaining -= 1
                raise BackendError("boom", retryable=self.retryable)
            return (-1.0, 1)

    def test_transient_failures_are_retried(self):
        backend = self.FlakyBackend(failures=2)
        client = make_client(backend)
        record = client.score_continuation("p", "c")
        assert record.sum_logprob == -1.0
        assert backend.calls == 3

    def test_gives_up_after_bounded_attempts(self):
        backend = self.FlakyBackend(failures=10)
        with pytest.raises(BackendError):
            make_client(backend).score_continuation("p", "c")
        assert backend.calls == 3

    def test_backend_reported_errors_not_retried(self):
        backend = self.FlakyBackend(failures=10, retryable=False)
        with pytest.raises(BackendError):
            make_client(backend).score_continuation("p", "c")
        assert backend.calls == 1

    def test_unreachable_endpoint(self):
        backend = HttpBackend("http://127.0.0.1:9", model="m", timeout=0.2)
        client = make_client(backend)
        with pytest.raises(BackendError):
            client.score_continuation("p", "c")
        assert client.backend_calls == 3


class TestAuth:
    def test_token_read_from_environment(self, monkeypatch):
        monkeypatch.setenv("TAXOKIT_TEST_TOKEN", "secret")
        backend = HttpBackend("http://x/v1/completions", model="m", auth_env="TAXOKIT_TEST_TOKEN")
        assert backend._headers["Authorization"] == "Bearer secret"

    def test_missing_token_is_configuration_error(self, monkeypatch):
        monkeypatch.delenv("TAXOKIT_TEST_TOKEN", raising=False)
        with pytest.raises(ConfigurationError):
            HttpBackend("http://x/v1/completions", model="m", auth_env="TAXOKIT_TEST_TOKEN")


class TestConcurrency:
    def test_results_independent_of_worker_count(self):
        items = [(f"prompt {i}", f"continuation {i},") for i in range(40)]
        serial = make_client(max_workers=1).score_many(items)
        threaded = make_client(max_workers=8).score_many(items)
        assert serial == threaded

    def test_threaded_cache_consistency(self):
        client = make_client(max_workers=8)
        items = [(f"p{i % 5}", "c") for i in range(40)]
        records = client.score_many(items)
        assert len({r for r in records}) == 5
        assert client.cache_stats().entries == 5


# --- HTTP protocol tests against a miniature in-process server ---------------

def _tokenize(text: str):
    """Whitespace-glued toy tokens: each token is \\S+ plus trailing spaces."""
    return [m.group(0) for m in re.finditer(r"\S+\s*|\s+", text)]


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        prompt = payload["prompt"]
        if prompt == "explode":
            self.send_response(400)
            self.end_headers()
            self.wfile.write(json.dumps({"error": {"message": "bad prompt"}}).encode())
            return
        if payload.get("echo") and payload.get("max_tokens") == 0:
            tokens = _tokenize(prompt)
            offsets = []
            pos = 0
            for tok in tokens:
                offsets.append(pos)
                pos += len(tok)
            logprobs = [None] + [-0.25] * (len(tokens) - 1)
            choice = {
                "text": prompt,
                "logprobs": {
                    "tokens": tokens,
                    "token_logprobs": logprobs,
                    "text_offset": offsets,
                },
            }
        else:
            choice = {
                "text": "generated text",
                "logprobs": {
                    "tokens": ["generated ", "text"],
                    "token_logprobs": [-0.5, -0.5],
                    "text_offset": [len(prompt), len(prompt) + 10],
                },
            }
        body = json.dumps({"choices": [choice] * payload.get("n", 1)}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture()
def http_backend():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield HttpBackend(f"http://127.0.0.1:{server.server_port}/v1/completions", model="toy")
    server.shutdown()


class TestHttpBackend:
    def test_scoring_aligns_continuation_tokens(self, http_backend):
        # full text "ab cd ef" -> tokens "ab ", "cd ", "ef"; continuation
        # "cd ef" begins inside the second token, which therefore counts
        sum_logprob, count = http_backend.score("ab ", "cd ef")
        assert count == 2
        assert sum_logprob == pytest.approx(-0.5)

    def test_boundary_straddling_token_goes_to_continuation(self, http_backend):
        # prompt ends mid-token: "ab c" + "d ef" -> token "cd " straddles
        sum_logprob, count = http_backend.score("ab c", "d ef")
        assert count == 2
        assert sum_logprob == pytest.approx(-0.5)

    def test_prompt_only_tokens_excluded(self, http_backend):
        sum_logprob, count = http_backend.score("ab cd ", "ef")
        assert count == 1
        assert sum_logprob == pytest.approx(-0.25)

    def test_completion_request(self, http_backend):
        out = http_backend.complete("some prompt", CompletionParams(num_completions=2))
        assert [c.text for c in out] == ["generated text", "generated text"]
        assert out[0].cumulative_logprob == pytest.approx(-1.0)

    def test_backend_reported_error_is_not_retryable(self, http_backend):
        client = make_client(http_backend)
        with pytest.raises(BackendError):
            client.complete("explode")
        assert client.backend_calls == 1


def test_score_record_build_guard():
    with pytest.raises(Exception):
        ScoreRecord.build("p", "c", -1.0, 0)
