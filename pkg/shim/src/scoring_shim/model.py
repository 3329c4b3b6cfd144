"""A tiny GRU causal language model with deterministic weights.

No pretrained checkpoint is assumed: the default model is generated from
a fixed seed, which is all protocol-conformance work needs (finite,
reproducible logprobs). A directory containing ``weights.pt`` saved by
:meth:`TinyCausalLM.save` can be loaded instead via ``--model <path>``.
"""

from __future__ import annotations

import threading
from pathlib import Path

import torch
from torch import nn

from .tokenizer import CharMergeTokenizer, TokenSpan

DEFAULT_SEED = 20240901


class TinyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, dim: int = 48, hidden: int = 96, seed: int = DEFAULT_SEED):
        super().__init__()
        torch.manual_seed(seed)
        self.embed = nn.Embedding(vocab_size, dim)
        self.rnn = nn.GRU(dim, hidden, num_layers=2, batch_first=True)
        self.head = nn.Linear(hidden, vocab_size)
        self.eval()

    @torch.no_grad()
    def next_logits(self, ids: list[int]) -> torch.Tensor:
        """Logits for the token following the given sequence."""
        x = self.embed(torch.tensor([ids], dtype=torch.long))
        out, _ = self.rnn(x)
        return self.head(out[0, -1])

    @torch.no_grad()
    def sequence_logprobs(self, ids: list[int]) -> list[float | None]:
        """Per-token logprobs; the first token is unconditioned (None)."""
        if len(ids) < 1:
            return []
        x = self.embed(torch.tensor([ids], dtype=torch.long))
        out, _ = self.rnn(x)
        logits = self.head(out[0])
        logprobs = torch.log_softmax(logits, dim=-1)
        result: list[float | None] = [None]
        for position in range(1, len(ids)):
            result.append(float(logprobs[position - 1, ids[position]]))
        return result

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.state_dict(), directory / "weights.pt")


class LanguageModelService:
    """Tokenizer + model + a lock serializing forward passes."""

    def __init__(self, model: TinyCausalLM, tokenizer: CharMergeTokenizer):
        self.model = model
        self.tokenizer = tokenizer
        self._forward_lock = threading.Lock()

    def score(self, text: str) -> tuple[list[TokenSpan], list[float | None]]:
        spans = self.tokenizer.encode(text)
        with self._forward_lock:
            logprobs = self.model.sequence_logprobs([s.id for s in spans])
        return spans, logprobs

    def generate(
        self,
        prompt: str,
        max_new_tokens: int,
        temperature: float,
        stop: list[str],
        seed: int = 0,
    ) -> tuple[str, list[str], list[float], str]:
        """Returns (text, token_strings, token_logprobs, finish_reason)."""
        prompt_ids = [s.id for s in self.tokenizer.encode(prompt)] or [self.tokenizer.bos_id]
        generator = torch.Generator().manual_seed(seed)
        ids = list(prompt_ids)
        tokens: list[str] = []
        logprobs: list[float] = []
        text = ""
        finish_reason = "length"
        with self._forward_lock:
            for _ in range(max_new_tokens):
                logits = self.model.next_logits(ids)
                distribution = torch.log_softmax(logits, dim=-1)
                if temperature == 0.0:
                    next_id = int(torch.argmax(logits))
                else:
                    probs = torch.softmax(logits / temperature, dim=-1)
                    next_id = int(torch.multinomial(probs, 1, generator=generator))
                piece = self.tokenizer.decode_id(next_id)
                ids.append(next_id)
                tokens.append(piece)
                logprobs.append(float(distribution[next_id]))
                text += piece
                hit = _earliest_stop(text, stop)
                if hit is not None:
                    text = text[:hit]
                    finish_reason = "stop"
                    break
        return text, tokens, logprobs, finish_reason


def _earliest_stop(text: str, stop: list[str]) -> int | None:
    positions = [text.find(s) for s in stop if s and text.find(s) >= 0]
    return min(positions) if positions else None


def load_model(spec: str = "builtin:tiny") -> LanguageModelService:
    """``builtin:tiny`` (optionally ``builtin:tiny:<seed>``) or a directory
    containing ``weights.pt``."""
    tokenizer = CharMergeTokenizer()
    if spec.startswith("builtin:tiny"):
        parts = spec.split(":")
        seed = int(parts[2]) if len(parts) > 2 else DEFAULT_SEED
        model = TinyCausalLM(tokenizer.size, seed=seed)
    else:
        directory = Path(spec)
        weights = directory / "weights.pt"
        if not weights.is_file():
            raise FileNotFoundError(f"no weights.pt under {directory}")
        model = TinyCausalLM(tokenizer.size)
        model.load_state_dict(torch.load(weights, map_location="cpu", weights_only=True))
        model.eval()
    torch.set_num_threads(1)  # bit-stable forward passes
    return LanguageModelService(model, tokenizer)
