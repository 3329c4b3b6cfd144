"""FastAPI app exposing the OpenAI-style completions protocol.

Supports the two request shapes clients rely on:

- generation: ``{prompt, max_tokens>0, temperature, n, stop, logprobs}``
- scoring: ``{prompt, max_tokens=0, echo=true, logprobs}`` returning
  per-token logprobs with character offsets over the echoed prompt.
"""

from __future__ import annotations

import threading
import time
import uuid
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .model import LanguageModelService


def _error(status: int, message: str, error_type: str = "invalid_request_error") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"message": message, "type": error_type}},
    )


def _logprob_block(tokens, token_logprobs, offsets) -> dict[str, Any]:
    return {
        "tokens": tokens,
        "token_logprobs": token_logprobs,
        "text_offset": offsets,
        "top_logprobs": None,
    }


def create_app(service: LanguageModelService, max_concurrency: int = 4, model_name: str = "builtin:tiny") -> FastAPI:
    app = FastAPI(title="scoring-shim")
    gate = threading.Semaphore(max_concurrency)

    @app.get("/health")
    def health():
        return {"status": "ok", "model": model_name}

    @app.post("/v1/completions")
    async def completions(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(payload, dict):
            return _error(400, "request body must be a JSON object")
        prompt = payload.get("prompt")
        if not isinstance(prompt, str):
            return _error(400, "'prompt' must be a string")
        try:
            max_tokens = int(payload.get("max_tokens", 16))
            temperature = float(payload.get("temperature", 0.0))
            n = int(payload.get("n", 1))
            seed = int(payload.get("seed", 0))
        except (TypeError, ValueError):
            return _error(400, "numeric field has a non-numeric value")
        echo = bool(payload.get("echo", False))
        want_logprobs = payload.get("logprobs") not in (None, False)
        stop = payload.get("stop") or []
        if isinstance(stop, str):
            stop = [stop]
        if max_tokens < 0:
            return _error(400, "'max_tokens' must be >= 0")
        if n < 1:
            return _error(400, "'n' must be >= 1")
        if temperature < 0:
            return _error(400, "'temperature' must be >= 0")
        if max_tokens == 0 and not echo:
            return _error(400, "max_tokens=0 requires echo=true (scoring mode)")

        def handle() -> dict:
            choices = []
            if max_tokens == 0:
                spans, logprobs = service.score(prompt)
                block = _logprob_block(
                    [s.text for s in spans], logprobs, [s.offset for s in spans]
                )
                for index in range(n):
                    choices.append(
                        {
                            "index": index,
                            "text": prompt,
                            "logprobs": block if want_logprobs else None,
                            "finish_reason": "stop",
                        }
                    )
            else:
                runs = 1 if temperature == 0.0 else n
                outputs = []
                for completion_index in range(runs):
                    outputs.append(
                        service.generate(
                            prompt,
                            max_new_tokens=max_tokens,
                            temperature=temperature,
                            stop=list(stop),
                            seed=seed + completion_index,
                        )
                    )
                if runs == 1 and n > 1:
                    outputs = outputs * n
                for index, (text, tokens, token_logprobs, finish_reason) in enumerate(outputs):
                    offsets = []
                    position = len(prompt)
                    kept_tokens = []
                    kept_logprobs = []
                    for token, logprob in zip(tokens, token_logprobs):
                        if position >= len(prompt) + len(text):
                            break  # trimmed by a stop sequence
                        offsets.append(position)
                        kept_tokens.append(token)
                        kept_logprobs.append(logprob)
                        position += len(token)
                    body = text
                    logprob_block = _logprob_block(kept_tokens, kept_logprobs, offsets)
                    if echo:
                        spans, prompt_logprobs = service.score(prompt)
                        logprob_block = _logprob_block(
                            [s.text for s in spans] + kept_tokens,
                            prompt_logprobs + kept_logprobs,
                            [s.offset for s in spans] + offsets,
                        )
                        body = prompt + text
                    choices.append(
                        {
                            "index": index,
                            "text": body,
                            "logprobs": logprob_block if want_logprobs else None,
                            "finish_reason": finish_reason,
                        }
                    )
            prompt_tokens = len(service.tokenizer.encode(prompt))
            completion_tokens = sum(
                len(c["logprobs"]["tokens"]) if c["logprobs"] else 0 for c in choices
            )
            return {
                "id": f"cmpl-{uuid.uuid4().hex[:24]}",
                "object": "text_completion",
                "created": int(time.time()),
                "model": model_name,
                "choices": choices,
                "usage": {
                    "prompt_tokens": prompt_tokens,
                    "completion_tokens": completion_tokens,
                    "total_tokens": prompt_tokens + completion_tokens,
                },
            }

        acquired = gate.acquire(timeout=120.0)
        if not acquired:
            return _error(503, "server concurrency limit saturated", "server_error")
        try:
            import anyio

            return await anyio.to_thread.run_sync(handle)
        finally:
            gate.release()

    return app
