"""Instruction dataset construction and prompt rendering.

Builds (hyponym -> hypernym) training pairs from a taxonomy graph, one
sample per edge, and renders them into the fixed chat-style template the
scoring and generation code relies on. The template strings are bit-exact
contracts: tests compare them byte-for-byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError, DataFormatError
from .textnorm import definition_key
from .wordnet import Synset, TaxonomyGraph

SYSTEM_PROMPT = (
    "[INST] <<SYS>> You are a helpful assistant. List all the possible words "
    "divided with a comma. Your answer should not include anything except the "
    "words divided by a comma <</SYS>>"
)
_INPUT_PREFIX = "hyponym: "
_INPUT_SUFFIX = " | hypernyms: [/INST]"

# published sizes of the three dataset variants, usable as sample_size targets
FULL_SIZE = 44772
BENCH_SIZE = 36775
VERB_SIZE = 7712

DEFINITION_SOURCE_PRIORITY = ("wordnet", "wikidata", "chatgpt")


@dataclass(frozen=True)
class InstructionSample:
    """One hyponym->hypernym pair with provenance into the source graph."""

    child_lemma: str
    target_hypernym_lemma: str
    child_id: str
    parent_id: str
    pos: str
    child_definition: str | None = None
    split: str = "train"


@dataclass(frozen=True)
class PromptBundle:
    """Rendered prompt parts for one sample.

    ``target`` is empty for generation-time bundles; otherwise it ends
    with a single comma. ``prompt_text`` is what gets sent to a backend:
    system line, optional completed demo lines, then the input line.
    """

    system: str
    input: str
    target: str
    few_shot_demos: tuple[tuple[str, str], ...] = ()

    @property
    def prompt_text(self) -> str:
        lines = [self.system]
        lines.extend(f"{demo_input} {demo_target}" for demo_input, demo_target in self.few_shot_demos)
        lines.append(self.input)
        return "\n".join(lines)


@dataclass(frozen=True)
class DatasetConfig:
    pos_filter: frozenset[str] = frozenset({"noun", "verb"})
    sample_size: int | None = None
    seed: int = 0
    exclude_node_ids: frozenset[str] = frozenset()
    val_fraction: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.val_fraction <= 1.0:
            raise ConfigurationError(f"val_fraction must be in [0,1], got {self.val_fraction}")
        if self.sample_size is not None and self.sample_size < 0:
            raise ConfigurationError("sample_size must be non-negative")


def render_input(lemma: str, definition: str | None = None) -> str:
    if definition:
        return f"{_INPUT_PREFIX}{lemma} ({definition}){_INPUT_SUFFIX}"
    return f"{_INPUT_PREFIX}{lemma}{_INPUT_SUFFIX}"


def render_target(hypernym_lemma: str) -> str:
    return f"{hypernym_lemma},"


def render_prompt(sample: InstructionSample, include_definition: bool = True) -> PromptBundle:
    """Render one sample into the fixed template.

    An empty-string definition is treated as absent.
    """
    definition = sample.child_definition if include_definition else None
    return PromptBundle(
        system=SYSTEM_PROMPT,
        input=render_input(sample.child_lemma, definition),
        target=render_target(sample.target_hypernym_lemma),
    )


def render_query(lemma: str, definition: str | None = None) -> PromptBundle:
    """Generation-time bundle: no target continuation."""
    return PromptBundle(system=SYSTEM_PROMPT, input=render_input(lemma, definition), target="")


def render_few_shot(
    demos: Sequence[InstructionSample],
    query: InstructionSample | PromptBundle,
    k: int,
    include_definition: bool = True,
) -> PromptBundle:
    """Prepend k completed demo lines before the query input.

    The query target is left empty: these bundles exist to be completed.
    """
    if k > len(demos):
        raise ConfigurationError(f"asked for {k} demos but only {len(demos)} available")
    rendered = [render_prompt(d, include_definition=include_definition) for d in demos[:k]]
    if isinstance(query, PromptBundle):
        query_input = query.input
    else:
        query_input = render_prompt(query, include_definition=include_definition).input
    return PromptBundle(
        system=SYSTEM_PROMPT,
        input=query_input,
        target="",
        few_shot_demos=tuple((b.input, b.target) for b in rendered),
    )


def parse_input(input_line: str) -> tuple[str, str | None]:
    """Recover (lemma, definition) from a rendered input line.

    Inverse of :func:`render_input` for lemmas that do not themselves
    contain the ``" ("`` sequence (WordNet lemmas never do).
    """
    if not input_line.startswith(_INPUT_PREFIX) or not input_line.endswith(_INPUT_SUFFIX):
        raise DataFormatError(f"input line does not match the template: {input_line!r}")
    body = input_line[len(_INPUT_PREFIX):-len(_INPUT_SUFFIX)]
    if body.endswith(")") and " (" in body:
        lemma, _, rest = body.partition(" (")
        return lemma, rest[:-1]
    return body, None


def build_pairs(graph: TaxonomyGraph, cfg: DatasetConfig) -> list[InstructionSample]:
    """One sample per selected hypernym edge, seeded and deterministic.

    Children with several parents contribute one sample per parent edge.
    Edges touching ``cfg.exclude_node_ids`` on either endpoint are never
    drawn. Sampling is a uniform draw without replacement over the
    remaining edges.
    """
    if len(graph) == 0:
        raise ConfigurationError("cannot build pairs from an empty graph")
    eligible = []
    for child, parent in sorted(graph.edges):
        if child in cfg.exclude_node_ids or parent in cfg.exclude_node_ids:
            continue
        payload = graph.node(child)
        if isinstance(payload, Synset) and payload.pos not in cfg.pos_filter:
            continue
        eligible.append((child, parent))
    rng = random.Random(cfg.seed)
    if cfg.sample_size is not None:
        if cfg.sample_size > len(eligible):
            raise ConfigurationError(
                f"sample_size {cfg.sample_size} exceeds {len(eligible)} eligible edges"
            )
        selected = rng.sample(eligible, cfg.sample_size)
    else:
        selected = eligible
    samples = []
    for child, parent in selected:
        child_payload = graph.node(child)
        parent_payload = graph.node(parent)
        if isinstance(child_payload, Synset):
            lemma = child_payload.lemma
            definition = child_payload.definition or None
            pos = child_payload.pos
        else:
            lemma, definition, pos = str(child_payload), None, "term"
        target = parent_payload.lemma if isinstance(parent_payload, Synset) else str(parent_payload)
        split = "val" if rng.random() < cfg.val_fraction else "train"
        samples.append(
            InstructionSample(
                child_lemma=lemma,
                target_hypernym_lemma=target,
                child_id=child,
                parent_id=parent,
                pos=pos,
                child_definition=definition,
                split=split,
            )
        )
    return samples


@dataclass(frozen=True)
class DefinitionRecord:
    term: str
    definition: str
    source: str


def import_definition_records(path: str | Path) -> list[DefinitionRecord]:
    """Parse a line-delimited {term, definition, source} file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                term = obj["term"]
                definition = obj["definition"]
                source = obj["source"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataFormatError(
                    f"bad definition record: {exc}", path=str(path), line=lineno
                ) from exc
            if source not in DEFINITION_SOURCE_PRIORITY:
                raise DataFormatError(
                    f"unknown definition source {source!r}", path=str(path), line=lineno
                )
            records.append(DefinitionRecord(term=term, definition=definition, source=source))
    return records


def import_definitions(path: str | Path) -> dict[str, str]:
    """term -> definition map; later records override earlier ones.

    Keys are case-folded and whitespace-trimmed.
    """
    mapping: dict[str, str] = {}
    for rec in import_definition_records(path):
        mapping[definition_key(rec.term)] = rec.definition
    return mapping


@dataclass
class DefinitionResolver:
    """Definition lookup with source priority wordnet > wikidata > chatgpt."""

    by_source: dict[str, dict[str, str]] = field(default_factory=dict)

    @classmethod
    def from_files(cls, paths: Iterable[str | Path]) -> "DefinitionResolver":
        resolver = cls()
        for path in paths:
            for rec in import_definition_records(path):
                resolver.add(rec.term, rec.definition, rec.source)
        return resolver

    def add(self, term: str, definition: str, source: str) -> None:
        if source not in DEFINITION_SOURCE_PRIORITY:
            raise ConfigurationError(f"unknown definition source {source!r}")
        self.by_source.setdefault(source, {})[definition_key(term)] = definition

    def lookup(self, term: str) -> str | None:
        key = definition_key(term)
        for source in DEFINITION_SOURCE_PRIORITY:
            hit = self.by_source.get(source, {}).get(key)
            if hit:
                return hit
        return None


def export_training_file(samples: Sequence[InstructionSample], path: str | Path,
                         include_definition: bool = True) -> int:
    """Write {system, input, target} records, one JSON line per sample."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            bundle = render_prompt(sample, include_definition=include_definition)
            record = {"system": bundle.system, "input": bundle.input, "target": bundle.target}
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count


def load_training_samples(path: str | Path) -> list[InstructionSample]:
    """Read an exported training file back into samples (for few-shot demos)."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                lemma, definition = parse_input(record["input"])
                target = record["target"]
            except (json.JSONDecodeError, KeyError, DataFormatError) as exc:
                raise DataFormatError(
                    f"bad training record: {exc}", path=str(path), line=lineno
                ) from exc
            samples.append(
                InstructionSample(
                    child_lemma=lemma,
                    target_hypernym_lemma=target.rstrip(","),
                    child_id=f"file:{lineno}",
                    parent_id=f"file:{lineno}:parent",
                    pos="term",
                    child_definition=definition,
                )
            )
    return samples


def with_split(sample: InstructionSample, split: str) -> InstructionSample:
    return replace(sample, split=split)


def dataset_stats(samples: Sequence[InstructionSample]) -> Mapping[str, int]:
    by_pos: dict[str, int] = {}
    by_split: dict[str, int] = {}
    for s in samples:
        by_pos[s.pos] = by_pos.get(s.pos, 0) + 1
        by_split[s.split] = by_split.get(s.split, 0) + 1
    return {
        "samples": len(samples),
        "children": len({s.child_id for s in samples}),
        "with_definition": sum(1 for s in samples if s.child_definition),
        **{f"pos_{k}": v for k, v in sorted(by_pos.items())},
        **{f"split_{k}": v for k, v in sorted(by_split.items())},
    }
