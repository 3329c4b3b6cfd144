"""Greedy longest-match tokenizer over printable characters plus merges.

Multi-character merge tokens exist so the prompt/continuation boundary
can land inside a token, which is exactly the alignment case clients
must handle. Encoding reports the verbatim text slice per token, so
character offsets always reconstruct the input.
"""

from __future__ import annotations

from dataclasses import dataclass

_MERGES = (
    " big", " cat", " the", " and", " of", " an", "ing", "at,", "er,", " hyper",
    "nym", "[/INST]", "[INST]", "<<SYS>>", "<</SYS>>",
)


@dataclass(frozen=True)
class TokenSpan:
    text: str      # verbatim slice of the input
    id: int
    offset: int    # character offset into the input


class CharMergeTokenizer:
    def __init__(self):
        chars = ["\n"] + [chr(c) for c in range(32, 127)]
        self.vocab: list[str] = chars + list(_MERGES)
        self.unk_id = len(self.vocab)
        self.bos_id = len(self.vocab) + 1
        self._by_string = {tok: i for i, tok in enumerate(self.vocab)}
        self._max_len = max(len(tok) for tok in self.vocab)

    @property
    def size(self) -> int:
        return len(self.vocab) + 2  # + unk + bos

    def encode(self, text: str) -> list[TokenSpan]:
        spans: list[TokenSpan] = []
        pos = 0
        while pos < len(text):
            match = None
            for length in range(min(self._max_len, len(text) - pos), 0, -1):
                candidate = text[pos:pos + length]
                if candidate in self._by_string:
                    match = candidate
                    break
            if match is None:
                spans.append(TokenSpan(text=text[pos], id=self.unk_id, offset=pos))
                pos += 1
            else:
                spans.append(TokenSpan(text=match, id=self._by_string[match], offset=pos))
                pos += len(match)
        return spans

    def decode_id(self, token_id: int) -> str:
        if token_id < len(self.vocab):
            return self.vocab[token_id]
        return "?"
