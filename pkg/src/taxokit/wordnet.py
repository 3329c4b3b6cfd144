"""WordNet-3.0 database parsing and an immutable hypernym graph.

Reads the standard ``dict/data.noun`` and ``dict/data.verb`` files. Each
data record becomes one :class:`Synset`; each ``@`` (hypernym) pointer
becomes one child->parent edge. Instance hypernyms (``@i``) are excluded
unless explicitly requested.

The same :class:`TaxonomyGraph` container also backs plain-term graphs
(node payload is the term string instead of a Synset), which the task
pipelines use for gold edge lists.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigurationError, DataFormatError, GraphLookupError, WordNetParseError

POS_FILES = {"noun": "data.noun", "verb": "data.verb"}
_POS_LETTER = {"noun": "n", "verb": "v"}
_LETTER_POS = {v: k for k, v in _POS_LETTER.items()}

_EXAMPLE_RE = re.compile(r'"([^"]*)"')


@dataclass(frozen=True)
class Synset:
    """One WordNet sense: its lemmas, gloss definition and usage examples."""

    id: str                 # "{offset:08d}-{n|v}"
    pos: str                # "noun" | "verb"
    lemmas: tuple[str, ...]  # underscores already replaced by spaces
    definition: str
    examples: tuple[str, ...]

    @property
    def lemma(self) -> str:
        """Preferred surface form: first lemma in record order."""
        return self.lemmas[0]


def synset_id(offset: int, pos: str) -> str:
    return f"{offset:08d}-{_POS_LETTER[pos]}"


def split_gloss(gloss: str) -> tuple[str, tuple[str, ...]]:
    """Split a raw gloss into (definition, examples).

    The definition is the text before the first ``; "`` sequence; the
    remainder holds double-quoted usage examples.
    """
    idx = gloss.find('; "')
    if idx < 0:
        return gloss.strip(), ()
    definition = gloss[:idx].strip()
    examples = tuple(m.group(1) for m in _EXAMPLE_RE.finditer(gloss[idx:]))
    return definition, examples


class TaxonomyGraph:
    """Immutable directed hypernym graph with adjacency indices.

    ``nodes`` maps id -> Synset (or id -> term string for plain-term
    graphs). Edges are ordered (hyponym_id, hypernym_id) pairs.
    """

    def __init__(self, nodes: Mapping[str, object], edges: Iterable[tuple[str, str]]):
        self._nodes = dict(nodes)
        edge_set = set()
        hypernyms: dict[str, list[str]] = {nid: [] for nid in self._nodes}
        hyponyms: dict[str, list[str]] = {nid: [] for nid in self._nodes}
        for child, parent in edges:
            if child not in self._nodes or parent not in self._nodes:
                missing = child if child not in self._nodes else parent
                raise DataFormatError(f"edge endpoint {missing!r} is not a node")
            if (child, parent) in edge_set:
                continue
            edge_set.add((child, parent))
            hypernyms[child].append(parent)
            hyponyms[parent].append(child)
        self._edges = frozenset(edge_set)
        self._hypernyms = {nid: tuple(sorted(ps)) for nid, ps in hypernyms.items()}
        self._hyponyms = {nid: tuple(sorted(cs)) for nid, cs in hyponyms.items()}

    @property
    def nodes(self) -> Mapping[str, object]:
        return self._nodes

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self._edges

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: str):
        try:
            return self._nodes[node_id]
        except KeyError:
            raise GraphLookupError(f"unknown node id {node_id!r}") from None

    def synset(self, node_id: str) -> Synset:
        payload = self.node(node_id)
        if not isinstance(payload, Synset):
            raise GraphLookupError(f"node {node_id!r} carries no synset payload")
        return payload

    def hypernym_ids(self, node_id: str) -> tuple[str, ...]:
        try:
            return self._hypernyms[node_id]
        except KeyError:
            raise GraphLookupError(f"unknown node id {node_id!r}") from None

    def hyponym_ids(self, node_id: str) -> tuple[str, ...]:
        try:
            return self._hyponyms[node_id]
        except KeyError:
            raise GraphLookupError(f"unknown node id {node_id!r}") from None

    def hypernyms(self, node_id: str) -> list:
        """Parent payloads in deterministic (id-sorted) order."""
        return [self._nodes[p] for p in self.hypernym_ids(node_id)]

    def hyponyms(self, node_id: str) -> list:
        return [self._nodes[c] for c in self.hyponym_ids(node_id)]

    def weak_components(self) -> list[frozenset[str]]:
        """Weakly connected components, largest first (then by smallest id)."""
        seen: set[str] = set()
        components: list[frozenset[str]] = []
        for start in self._nodes:
            if start in seen:
                continue
            queue = deque([start])
            seen.add(start)
            comp = {start}
            while queue:
                nid = queue.popleft()
                for nxt in self._hypernyms[nid] + self._hyponyms[nid]:
                    if nxt not in seen:
                        seen.add(nxt)
                        comp.add(nxt)
                        queue.append(nxt)
            components.append(frozenset(comp))
        components.sort(key=lambda c: (-len(c), min(c)))
        return components

    def shortest_path_len(self, src: str, dst: str, directed: bool = True) -> int | None:
        """Minimal edge count from src to dst, or None when unreachable."""
        if src not in self._nodes:
            raise GraphLookupError(f"unknown node id {src!r}")
        if dst not in self._nodes:
            raise GraphLookupError(f"unknown node id {dst!r}")
        if src == dst:
            return 0
        queue = deque([(src, 0)])
        seen = {src}
        while queue:
            nid, dist = queue.popleft()
            neighbors = self._hypernyms[nid]
            if not directed:
                neighbors = neighbors + self._hyponyms[nid]
            for nxt in neighbors:
                if nxt == dst:
                    return dist + 1
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append((nxt, dist + 1))
        return None


def hypernyms(graph: TaxonomyGraph, node_id: str) -> list:
    return graph.hypernyms(node_id)


def weak_components(graph: TaxonomyGraph) -> list[frozenset[str]]:
    return graph.weak_components()


def shortest_path_len(graph: TaxonomyGraph, src: str, dst: str, directed: bool = True) -> int | None:
    return graph.shortest_path_len(src, dst, directed=directed)


def _parse_data_file(path: Path, pos: str, include_instance_hypernyms: bool):
    """Yield (Synset, [(child_id, parent_id), ...]) per record in file order."""
    letter = _POS_LETTER[pos]
    byte_offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            record_offset = byte_offset
            byte_offset += len(raw)
            line = raw.decode("utf-8").rstrip("\r\n")
            if not line or line.startswith("  "):
                continue  # license header
            try:
                synset, edges = _parse_record(line, pos, letter, include_instance_hypernyms)
            except (ValueError, IndexError) as exc:
                raise WordNetParseError(
                    f"malformed {pos} record: {exc}", path=str(path), byte_offset=record_offset
                ) from exc
            yield synset, edges


def _parse_record(line: str, pos: str, letter: str, include_instance: bool):
    body, sep, gloss = line.partition(" | ")
    if not sep:
        raise ValueError("missing gloss separator '|'")
    tokens = body.split(" ")
    offset = int(tokens[0])
    ss_type = tokens[2]
    if ss_type != letter:
        raise ValueError(f"unexpected ss_type {ss_type!r} in data.{pos}")
    w_cnt = int(tokens[3], 16)
    if w_cnt < 1:
        raise ValueError("record has no lemmas")
    lemmas = []
    idx = 4
    for _ in range(w_cnt):
        lemmas.append(tokens[idx].replace("_", " "))
        int(tokens[idx + 1], 16)  # lex_id sanity check
        idx += 2
    p_cnt = int(tokens[idx])
    idx += 1
    child_id = f"{offset:08d}-{letter}"
    edges = []
    for _ in range(p_cnt):
        symbol = tokens[idx]
        target_offset = int(tokens[idx + 1])
        target_pos = tokens[idx + 2]
        # tokens[idx + 3] is the source/target lemma field; unused here
        idx += 4
        wanted = symbol == "@" or (include_instance and symbol == "@i")
        if wanted:
            edges.append((child_id, f"{target_offset:08d}-{target_pos}"))
    definition, examples = split_gloss(gloss)
    if not definition:
        raise ValueError("empty definition after gloss split")
    synset = Synset(
        id=child_id,
        pos=pos,
        lemmas=tuple(lemmas),
        definition=definition,
        examples=examples,
    )
    return synset, edges


def parse_wordnet(
    dict_dir: str | Path,
    pos_filter: Iterable[str] = ("noun", "verb"),
    include_instance_hypernyms: bool = False,
) -> TaxonomyGraph:
    """Parse a WordNet-3.0 ``dict`` directory into a TaxonomyGraph.

    Only hypernym (``@``) pointers create edges; ``@i`` instance pointers
    are included only when ``include_instance_hypernyms`` is set.
    """
    dict_dir = Path(dict_dir)
    for pos in pos_filter:
        if pos not in POS_FILES:
            raise ConfigurationError(f"unsupported pos {pos!r}: expected noun/verb")
    poses = sorted(set(pos_filter), key=["noun", "verb"].index)
    nodes: dict[str, Synset] = {}
    edges: list[tuple[str, str]] = []
    for pos in poses:
        path = dict_dir / POS_FILES[pos]
        if not path.is_file():
            raise ConfigurationError(f"WordNet data file not found: {path}")
        for synset, record_edges in _parse_data_file(path, pos, include_instance_hypernyms):
            nodes[synset.id] = synset
            edges.extend(record_edges)
    for child, parent in edges:
        if parent not in nodes:
            raise WordNetParseError(
                f"hypernym pointer from {child} targets unknown synset {parent}",
                path=str(dict_dir),
            )
    return TaxonomyGraph(nodes, edges)


def build_term_graph(edges: Iterable[tuple[str, str]], extra_terms: Iterable[str] = ()) -> TaxonomyGraph:
    """Graph over plain term strings (payload == id == term)."""
    edge_list = list(edges)
    terms = {t for e in edge_list for t in e}
    terms.update(extra_terms)
    return TaxonomyGraph({t: t for t in sorted(terms)}, edge_list)


def save_graph(graph: TaxonomyGraph, nodes_path: str | Path, edges_path: str | Path) -> None:
    """Dump a synset graph as nodes.jsonl + edges.tsv (UTF-8, LF, id-sorted)."""
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
        for nid in sorted(graph.nodes):
            syn = graph.synset(nid)
            record = {
                "id": syn.id,
                "pos": syn.pos,
                "lemmas": list(syn.lemmas),
                "definition": syn.definition,
                "examples": list(syn.examples),
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        for child, parent in sorted(graph.edges):
            fh.write(f"{child}\t{parent}\n")


def load_nodes(nodes_path: str | Path) -> dict[str, Synset]:
    """Read a nodes.jsonl dump back into Synsets."""
    nodes: dict[str, Synset] = {}
    with open(nodes_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                syn = Synset(
                    id=record["id"],
                    pos=record["pos"],
                    lemmas=tuple(record["lemmas"]),
                    definition=record["definition"],
                    examples=tuple(record["examples"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataFormatError(
                    f"bad node record: {exc}", path=str(nodes_path), line=lineno
                ) from exc
            nodes[syn.id] = syn
    return nodes


def load_edges(edges_path: str | Path) -> list[tuple[str, str]]:
    """Read an edges.tsv dump back into (child, parent) pairs."""
    edges: list[tuple[str, str]] = []
    with open(edges_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError("expected 'child<TAB>parent'", path=str(edges_path), line=lineno)
            edges.append((parts[0], parts[1]))
    return edges


def load_graph(nodes_path: str | Path, edges_path: str | Path) -> TaxonomyGraph:
    """Inverse of :func:`save_graph`."""
    return TaxonomyGraph(load_nodes(nodes_path), load_edges(edges_path))


def pos_from_id(node_id: str) -> str:
    """Recover the pos name from a canonical synset id."""
    letter = node_id.rsplit("-", 1)[-1]
    try:
        return _LETTER_POS[letter]
    except KeyError:
        raise DataFormatError(f"cannot infer pos from node id {node_id!r}") from None
