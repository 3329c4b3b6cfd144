"""Perplexity-ratio scoring of ordered (hyponym, hypernym) pairs.

The forward score is the perplexity of the hypernym as a continuation of
the hyponym prompt; the reverse score swaps the roles. Their ratio is the
confidence: lower means the model believes the hypernymy direction more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .client import ScoringClient
from .dataset import render_query, render_target
from .errors import ConfigurationError, DataFormatError


@dataclass(frozen=True)
class Term:
    text: str
    definition: str | None = None


@dataclass(frozen=True)
class PairScore:
    hyponym: str
    hypernym: str
    ppl_forward: float
    ppl_reverse: float
    confidence: float

    def as_dict(self) -> dict:
        return {
            "hyponym": self.hyponym,
            "hypernym": self.hypernym,
            "ppl_forward": self.ppl_forward,
            "ppl_reverse": self.ppl_reverse,
            "confidence": self.confidence,
        }


def scoring_prompt(term: Term, include_definition: bool = True) -> str:
    """Prompt prefix for scoring a continuation after this term's input line.

    A trailing space keeps the continuation a separate word; backends that
    merge the boundary into one token still attribute it to the
    continuation (see the client's offset rule).
    """
    definition = term.definition if include_definition else None
    return render_query(term.text, definition).prompt_text + " "


class PairScorer:
    """Scores ordered pairs through a ScoringClient."""

    def __init__(self, client: ScoringClient, include_definitions: bool = True):
        self.client = client
        self.include_definitions = include_definitions

    def _ppl(self, context: Term, target: Term) -> float:
        prompt = scoring_prompt(context, self.include_definitions)
        record = self.client.score_continuation(prompt, render_target(target.text))
        return record.perplexity

    def score_pair(self, hypo: Term, hyper: Term) -> PairScore:
        if not hypo.text or not hyper.text:
            raise ConfigurationError("cannot score a pair with an empty term")
        ppl_forward = self._ppl(hypo, hyper)
        ppl_reverse = self._ppl(hyper, hypo)
        return PairScore(
            hyponym=hypo.text,
            hypernym=hyper.text,
            ppl_forward=ppl_forward,
            ppl_reverse=ppl_reverse,
            confidence=ppl_forward / ppl_reverse,
        )

    def score_pairs(self, pairs: Sequence[tuple[Term, Term]]) -> list[PairScore]:
        """Score many pairs; perplexity lookups go through score_many so the
        client's worker pool and cache both apply."""
        prompts: dict[Term, str] = {}
        targets: dict[str, str] = {}

        def job(context: Term, target: Term) -> tuple[str, str]:
            if not context.text or not target.text:
                raise ConfigurationError("cannot score a pair with an empty term")
            if context not in prompts:
                prompts[context] = scoring_prompt(context, self.include_definitions)
            if target.text not in targets:
                targets[target.text] = render_target(target.text)
            return prompts[context], targets[target.text]

        jobs = []
        for hypo, hyper in pairs:
            jobs.append(job(hypo, hyper))
            jobs.append(job(hyper, hypo))
        records = self.client.score_many(jobs)
        scores = []
        for idx, (hypo, hyper) in enumerate(pairs):
            fwd = records[2 * idx].perplexity
            rev = records[2 * idx + 1].perplexity
            scores.append(
                PairScore(
                    hyponym=hypo.text,
                    hypernym=hyper.text,
                    ppl_forward=fwd,
                    ppl_reverse=rev,
                    confidence=fwd / rev,
                )
            )
        return scores


def entailment_probabilities(
    scores: Sequence[PairScore], invert_ratio: bool = False
) -> list[float]:
    """L2-normalize the pair ratios into [0, 1] entailment probabilities.

    ``invert_ratio`` flips each ratio to reverse/forward, scoring the
    hyponymy direction instead.
    """
    if not scores:
        raise ConfigurationError("entailment_probabilities needs at least one pair")
    ratios = []
    for s in scores:
        ratio = s.confidence if not invert_ratio else 1.0 / s.confidence
        if not math.isfinite(ratio):
            raise DataFormatError(f"non-finite confidence ratio for ({s.hyponym}, {s.hypernym})")
        ratios.append(ratio)
    norm = math.sqrt(sum(r * r for r in ratios))
    return [min(1.0, max(0.0, r / norm)) for r in ratios]
