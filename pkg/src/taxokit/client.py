"""Uniform client over completion backends with logprob scoring and a cache.

Two backends ship in-tree: an HTTP backend speaking the OpenAI-style
completions protocol (scoring via ``echo=true`` + ``max_tokens=0``), and a
deterministic table-driven mock for tests and offline runs. The client
adds bounded retries, a bounded worker pool, and a persistent append-only
score cache keyed by content digests.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import requests

from .errors import BackendError, CapabilityError, ConfigurationError, DataFormatError
from .textnorm import canonical_json, digest


@dataclass(frozen=True)
class CompletionParams:
    max_new_tokens: int = 32
    temperature: float = 0.0
    num_completions: int = 1
    stop_sequences: tuple[str, ...] = ("\n",)

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ConfigurationError("max_new_tokens must be >= 1")
        if self.num_completions < 1:
            raise ConfigurationError("num_completions must be >= 1")
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")

    def key(self) -> str:
        return canonical_json(
            {
                "max_new_tokens": self.max_new_tokens,
                "temperature": self.temperature,
                "num_completions": self.num_completions,
                "stop_sequences": list(self.stop_sequences),
            }
        )


@dataclass(frozen=True)
class Completion:
    text: str
    cumulative_logprob: float | None = None


@dataclass(frozen=True)
class ScoreRecord:
    """Perplexity of one continuation given one prompt, target tokens only."""

    prompt_hash: str
    continuation: str
    sum_logprob: float
    token_count: int
    perplexity: float

    @classmethod
    def build(cls, prompt: str, continuation: str, sum_logprob: float, token_count: int):
        if token_count < 1:
            raise DataFormatError("continuation scored over zero tokens")
        return cls(
            prompt_hash=digest(prompt)[:16],
            continuation=continuation,
            sum_logprob=sum_logprob,
            token_count=token_count,
            perplexity=math.exp(-sum_logprob / token_count),
        )


@dataclass
class CacheStats:
    entries: int = 0
    hits: int = 0
    misses: int = 0

    def as_dict(self) -> dict[str, int]:
        return {"entries": self.entries, "hits": self.hits, "misses": self.misses}


class ScoreCache:
    """Append-only JSONL cache, compacted on load; safe for threaded use.

    ``enabled=False`` turns it into a pass-through that stores nothing.
    """

    def __init__(self, path: str | Path | None, enabled: bool = True):
        self._path = Path(path) if path else None
        self._enabled = enabled
        self._lock = threading.Lock()
        self._data: dict[str, dict] = {}
        self.stats = CacheStats()
        if self._enabled and self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                self._load()

    def _load(self) -> None:
        duplicates = False
        with open(self._path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key = record["key"]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataFormatError(
                        f"bad cache record: {exc}", path=str(self._path), line=lineno
                    ) from exc
                if key in self._data:
                    duplicates = True
                self._data[key] = record["value"]
        self.stats.entries = len(self._data)
        if duplicates:
            self._rewrite()

    def _rewrite(self) -> None:
        tmp = self._path.with_suffix(self._path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(self._data):
                fh.write(json.dumps({"key": key, "value": self._data[key]}, sort_keys=True) + "\n")
        os.replace(tmp, self._path)

    def get(self, key: str):
        with self._lock:
            if key in self._data:
                self.stats.hits += 1
                return self._data[key]
            self.stats.misses += 1
            return None

    def put(self, key: str, value: dict) -> None:
        if not self._enabled:
            return
        with self._lock:
            if key in self._data:
                return
            self._data[key] = value
            self.stats.entries = len(self._data)
            if self._path:
                with open(self._path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(json.dumps({"key": key, "value": value}, sort_keys=True) + "\n")
                    fh.flush()


class Backend:
    """Interface both real and mock backends implement."""

    backend_id: str = "backend"
    supports_logprobs: bool = True

    def complete(self, prompt: str, params: CompletionParams) -> list[Completion]:
        raise NotImplementedError

    def score(self, prompt: str, continuation: str) -> tuple[float, int]:
        """(sum of continuation-token logprobs, continuation token count)."""
        raise NotImplementedError


class MockBackend(Backend):
    """Deterministic table-driven backend.

    The table is a JSONL file of records carrying either completion rows
    ``{prompt, text}`` or scoring rows ``{prompt, continuation,
    sum_logprob, token_count}``. With ``fallback="hash"`` unknown keys get
    deterministic pseudo-scores derived from a content digest, which keeps
    large synthetic runs self-contained.
    """

    def __init__(self, table_path: str | Path | None = None, fallback: str = "error"):
        if fallback not in ("error", "hash"):
            raise ConfigurationError(f"unknown mock fallback {fallback!r}")
        self._completions: dict[str, str] = {}
        self._scores: dict[tuple[str, str], tuple[float, int]] = {}
        self._fallback = fallback
        source = "empty"
        if table_path is not None:
            source = self._load(Path(table_path))
        self.backend_id = f"mock:{source}"

    def _load(self, path: Path) -> str:
        if not path.is_file():
            raise ConfigurationError(f"mock table not found: {path}")
        with open(path, encoding="utf-8") as fh:
            content = fh.read()
        for lineno, line in enumerate(content.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                prompt = record["prompt"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataFormatError(
                    f"bad mock record: {exc}", path=str(path), line=lineno
                ) from exc
            if "continuation" in record:
                self._scores[(prompt, record["continuation"])] = (
                    float(record["sum_logprob"]),
                    int(record["token_count"]),
                )
            elif "text" in record:
                self._completions[prompt] = record["text"]
            else:
                raise DataFormatError(
                    "mock record needs either 'text' or 'continuation'",
                    path=str(path), line=lineno,
                )
        return digest(content)[:12]

    def add_score(self, prompt: str, continuation: str, sum_logprob: float, token_count: int):
        self._scores[(prompt, continuation)] = (sum_logprob, token_count)

    def add_completion(self, prompt: str, text: str):
        self._completions[prompt] = text

    def _hash_score(self, prompt: str, continuation: str) -> tuple[float, int]:
        token_count = max(1, len(continuation.split()))
        unit = int(digest(prompt, continuation)[:12], 16) / 16**12  # in [0, 1)
        return (-(0.05 + 6.0 * unit) * token_count, token_count)

    def complete(self, prompt: str, params: CompletionParams) -> list[Completion]:
        text = self._completions.get(prompt)
        if text is None:
            if self._fallback == "error":
                raise BackendError(f"mock table has no completion for prompt hash {digest(prompt)[:12]}")
            text = f"term-{digest(prompt)[:6]},"
        logprob, _ = self._scores.get((prompt, text), self._hash_score(prompt, text))
        return [Completion(text=text, cumulative_logprob=logprob)] * params.num_completions

    def score(self, prompt: str, continuation: str) -> tuple[float, int]:
        hit = self._scores.get((prompt, continuation))
        if hit is None:
            if self._fallback == "error":
                raise BackendError(
                    f"mock table has no score for ({digest(prompt)[:12]}, {continuation!r})"
                )
            hit = self._hash_score(prompt, continuation)
        return hit


class HttpBackend(Backend):
    """OpenAI-compatible completions endpoint over HTTP JSON."""

    def __init__(
        self,
        url: str,
        model: str,
        auth_env: str | None = None,
        timeout: float = 120.0,
        supports_logprobs: bool = True,
        session: requests.Session | None = None,
    ):
        self.url = url
        self.model = model
        self.timeout = timeout
        self.supports_logprobs = supports_logprobs
        self.backend_id = f"http:{url}:{model}"
        self._headers = {"Content-Type": "application/json"}
        if auth_env:
            token = os.environ.get(auth_env)
            if not token:
                raise ConfigurationError(f"auth environment variable {auth_env} is not set")
            self._headers["Authorization"] = f"Bearer {token}"
        self._session = session or requests.Session()

    def _post(self, payload: dict) -> dict:
        try:
            response = self._session.post(
                self.url, json=payload, headers=self._headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendError(f"transport failure: {exc}", retryable=True) from exc
        if response.status_code != 200:
            detail = ""
            try:
                detail = response.json().get("error", {}).get("message", "")
            except Exception:
                detail = response.text[:200]
            raise BackendError(f"backend error {response.status_code}: {detail}")
        try:
            return response.json()
        except ValueError as exc:
            raise BackendError(f"backend returned non-JSON payload: {exc}") from exc

    def complete(self, prompt: str, params: CompletionParams) -> list[Completion]:
        payload = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": params.max_new_tokens,
            "temperature": params.temperature,
            "n": params.num_completions,
            "logprobs": 1 if self.supports_logprobs else None,
            "echo": False,
        }
        if params.stop_sequences:
            payload["stop"] = list(params.stop_sequences)
        data = self._post(payload)
        completions = []
        for choice in data.get("choices", []):
            logprobs = choice.get("logprobs") or {}
            token_logprobs = [lp for lp in logprobs.get("token_logprobs") or [] if lp is not None]
            completions.append(
                Completion(
                    text=choice.get("text", ""),
                    cumulative_logprob=sum(token_logprobs) if token_logprobs else None,
                )
            )
        if not completions:
            raise BackendError("backend returned no choices")
        return completions

    def score(self, prompt: str, continuation: str) -> tuple[float, int]:
        full_text = prompt + continuation
        payload = {
            "model": self.model,
            "prompt": full_text,
            "max_tokens": 0,
            "temperature": 0.0,
            "logprobs": 1,
            "echo": True,
        }
        data = self._post(payload)
        try:
            logprobs = data["choices"][0]["logprobs"]
            tokens = logprobs["tokens"]
            token_logprobs = logprobs["token_logprobs"]
            offsets = logprobs["text_offset"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"echo response lacks logprobs arrays: {exc}") from exc
        boundary = len(prompt)
        total = 0.0
        count = 0
        for token, logprob, offset in zip(tokens, token_logprobs, offsets):
            # a token straddling the prompt/continuation boundary belongs
            # to the continuation
            if offset + len(token) <= boundary:
                continue
            if logprob is None:
                raise BackendError(
                    "continuation span includes the first token, which has no logprob"
                )
            total += logprob
            count += 1
        if count == 0:
            raise BackendError("no tokens aligned to the continuation span")
        return total, count


class ScoringClient:
    """Backend + cache + retries + bounded parallelism."""

    def __init__(
        self,
        backend: Backend,
        cache: ScoreCache | None = None,
        max_workers: int = 1,
        retries: int = 3,
        backoff_start: float = 0.5,
        require_logprobs: bool = False,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if require_logprobs and not backend.supports_logprobs:
            raise CapabilityError(
                f"backend {backend.backend_id} does not support continuation logprobs"
            )
        self.backend = backend
        self.cache = cache if cache is not None else ScoreCache(None)
        self.max_workers = max(1, max_workers)
        self.retries = retries
        self.backoff_start = backoff_start
        self._sleep = sleep
        self._calls_lock = threading.Lock()
        self.backend_calls = 0

    def _call(self, fn, *args):
        delay = self.backoff_start
        last: BackendError | None = None
        for attempt in range(self.retries):
            try:
                with self._calls_lock:
                    self.backend_calls += 1
                return fn(*args)
            except BackendError as exc:
                if not exc.retryable:
                    raise
                last = exc
                if attempt < self.retries - 1:
                    self._sleep(delay)
                    delay *= 2
        raise BackendError(f"giving up after {self.retries} attempts: {last}")

    def complete(self, prompt: str, params: CompletionParams | None = None) -> list[Completion]:
        params = params or CompletionParams()
        key = digest(self.backend.backend_id, "complete", prompt, params.key())
        cached = self.cache.get(key)
        if cached is not None:
            return [Completion(**c) for c in cached["completions"]]
        completions = self._call(self.backend.complete, prompt, params)
        self.cache.put(
            key,
            {
                "completions": [
                    {"text": c.text, "cumulative_logprob": c.cumulative_logprob}
                    for c in completions
                ]
            },
        )
        return completions

    def score_continuation(self, prompt: str, continuation: str) -> ScoreRecord:
        if not continuation:
            raise ConfigurationError("cannot score an empty continuation")
        key = digest(self.backend.backend_id, "score", prompt, continuation)
        cached = self.cache.get(key)
        if cached is not None:
            return ScoreRecord.build(prompt, continuation, cached["sum_logprob"], cached["token_count"])
        sum_logprob, token_count = self._call(self.backend.score, prompt, continuation)
        self.cache.put(key, {"sum_logprob": sum_logprob, "token_count": token_count})
        return ScoreRecord.build(prompt, continuation, sum_logprob, token_count)

    def score_many(self, items: Sequence[tuple[str, str]]) -> list[ScoreRecord]:
        """Score (prompt, continuation) pairs, preserving input order."""
        if self.max_workers == 1 or len(items) <= 1:
            return [self.score_continuation(p, c) for p, c in items]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(lambda pc: self.score_continuation(*pc), items))

    def complete_many(
        self, prompts: Sequence[str], params: CompletionParams | None = None
    ) -> list[list[Completion]]:
        if self.max_workers == 1 or len(prompts) <= 1:
            return [self.complete(p, params) for p in prompts]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(lambda p: self.complete(p, params), prompts))

    def cache_stats(self) -> CacheStats:
        return self.cache.stats
