"""The four task pipelines and constructed-graph diagnostics.

Hypernym Discovery and Taxonomy Enrichment run the generative route (the
model lists hypernyms, candidates are parsed off the completion).
Taxonomy Construction and Lexical Entailment run the ranking route
(forward/reverse perplexities over ordered pairs). All graph
post-processing here is deterministic, including tie-breaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import metrics
from .client import CompletionParams, ScoringClient
from .dataset import InstructionSample, render_few_shot, render_query
from .errors import ConfigurationError, DataFormatError
from .metrics import AP_TIE_POLICY, AUC_NORM_FORMULA
from .ranking import PairScore, PairScorer, Term, entailment_probabilities
from .reporting import EvalReport
from .textnorm import normalize_term
from .wordnet import Synset, TaxonomyGraph, build_term_graph

DEFAULT_CANDIDATE_CAP = 15


@dataclass(frozen=True)
class RankedPrediction:
    query: str
    candidates: tuple[str, ...]
    raw_completion: str


@dataclass(frozen=True)
class ConstructionConfig:
    threshold: float
    max_parents: int = 3
    score_for_pruning: str = "forward_perplexity"

    def __post_init__(self):
        if self.threshold <= 0:
            raise ConfigurationError("threshold must be positive")
        if self.max_parents < 1:
            raise ConfigurationError("max_parents must be >= 1")
        if self.score_for_pruning != "forward_perplexity":
            raise ConfigurationError(
                f"unsupported pruning score {self.score_for_pruning!r}"
            )


@dataclass
class GraphStats:
    nodes: int
    edges: int
    weak_components: int
    nodes_missing: int | None = None
    nodes_without_original_hypernym: int | None = None
    nodes_without_path_to_original: int | None = None
    nodes_with_path_to_original: int | None = None
    mean_distance_to_original: float | None = None

    def check_identity(self) -> None:
        parts = (
            self.nodes_with_path_to_original,
            self.nodes_without_path_to_original,
            self.nodes_without_original_hypernym,
        )
        if all(p is not None for p in parts) and sum(parts) != self.nodes:
            raise DataFormatError(
                f"graph stats do not partition the node set: {parts} vs {self.nodes} nodes"
            )

    def as_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "weak_components": self.weak_components,
            "nodes_missing": self.nodes_missing,
            "nodes_without_original_hypernym": self.nodes_without_original_hypernym,
            "nodes_without_path_to_original": self.nodes_without_path_to_original,
            "nodes_with_path_to_original": self.nodes_with_path_to_original,
            "mean_distance_to_original": self.mean_distance_to_original,
        }


@dataclass(frozen=True)
class EnrichResult:
    query: str
    ranked_ids: tuple[str, ...]     # matched first (generation order), then the rest
    matched_ids: tuple[str, ...]    # the matched prefix only
    raw_completion: str

    def rank_of(self, node_id: str) -> int | None:
        """1-based rank among matched candidates; unmatched count as absent."""
        try:
            return self.matched_ids.index(node_id) + 1
        except ValueError:
            return None


@dataclass
class ConstructionResult:
    edges: set[tuple[str, str]]
    pair_scores: dict[tuple[str, str], PairScore]
    stats: GraphStats


def parse_candidates(completion: str, cap: int = DEFAULT_CANDIDATE_CAP) -> tuple[str, ...]:
    """Comma-split a completion into a deduplicated candidate list."""
    out: list[str] = []
    seen: set[str] = set()
    for chunk in completion.split(","):
        term = chunk.strip()
        if not term:
            continue
        key = normalize_term(term)
        if key in seen:
            continue
        seen.add(key)
        out.append(term)
        if len(out) >= cap:
            break
    return tuple(out)


def discover(
    client: ScoringClient,
    term: str,
    definition: str | None = None,
    few_shot_demos: Sequence[InstructionSample] = (),
    k: int = 0,
    cap: int = DEFAULT_CANDIDATE_CAP,
    params: CompletionParams | None = None,
) -> RankedPrediction:
    """Generate ranked hypernym candidates for one query term."""
    return discover_many(client, [(term, definition)], few_shot_demos, k, cap, params)[0]


def discover_many(
    client: ScoringClient,
    queries: Sequence[tuple[str, str | None]],
    few_shot_demos: Sequence[InstructionSample] = (),
    k: int = 0,
    cap: int = DEFAULT_CANDIDATE_CAP,
    params: CompletionParams | None = None,
) -> list[RankedPrediction]:
    """Batched discover(): one completion per query through the worker pool."""
    bundles = []
    for term, definition in queries:
        if not term:
            raise ConfigurationError("discover needs a non-empty term")
        bundle = render_query(term, definition)
        if k:
            bundle = render_few_shot(few_shot_demos, bundle, k)
        bundles.append(bundle)
    completions = client.complete_many([b.prompt_text + " " for b in bundles], params)
    return [
        RankedPrediction(
            query=term,
            candidates=parse_candidates(comps[0].text, cap),
            raw_completion=comps[0].text,
        )
        for (term, _), comps in zip(queries, completions)
    ]


def evaluate_discovery(
    preds: Sequence[RankedPrediction], gold_path: str | Path, config_digest: str = ""
) -> EvalReport:
    """MRR of the first gold hypernym found in each candidate list."""
    gold_sets = read_semeval_gold(gold_path)
    if len(gold_sets) != len(preds):
        raise DataFormatError(
            f"{len(preds)} predictions vs {len(gold_sets)} gold lines", path=str(gold_path)
        )
    ranks: list[int | None] = []
    items = []
    for pred, gold in zip(preds, gold_sets):
        gold_norm = {normalize_term(g) for g in gold}
        rank = None
        for idx, candidate in enumerate(pred.candidates, start=1):
            if normalize_term(candidate) in gold_norm:
                rank = idx
                break
        ranks.append(rank)
        items.append(
            {
                "query": pred.query,
                "candidates": list(pred.candidates),
                "gold": sorted(gold_norm),
                "rank": rank,
            }
        )
    return EvalReport(
        task="hypernym-discovery",
        config_digest=config_digest,
        metrics={"mrr": metrics.mrr(ranks)},
        items=items,
        metadata={"queries": len(preds)},
    )


def _node_match_keys(payload) -> set[str]:
    if isinstance(payload, Synset):
        return {normalize_term(lemma) for lemma in payload.lemmas}
    return {normalize_term(str(payload))}


def enrich(
    client: ScoringClient,
    query: Term,
    candidate_ids: Sequence[str],
    graph: TaxonomyGraph,
    params: CompletionParams | None = None,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> EnrichResult:
    """Rank existing taxonomy nodes as hypernym attachments for the query.

    Generated strings are matched to candidate nodes by normalized lemma
    equality; nodes never generated keep their input order after all
    matches and count as unranked for metrics.
    """
    return enrich_many(client, [query], candidate_ids, graph, params, cap)[0]


def enrich_many(
    client: ScoringClient,
    queries: Sequence[Term],
    candidate_ids: Sequence[str],
    graph: TaxonomyGraph,
    params: CompletionParams | None = None,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> list[EnrichResult]:
    """Batched enrich() over a shared candidate set."""
    if not candidate_ids:
        raise ConfigurationError("enrich needs a non-empty candidate list")
    prompts = [render_query(q.text, q.definition).prompt_text + " " for q in queries]
    completions = client.complete_many(prompts, params)
    match_keys = {cid: _node_match_keys(graph.node(cid)) for cid in candidate_ids}
    results = []
    for query, comps in zip(queries, completions):
        raw = comps[0].text
        matched: list[str] = []
        for gen in parse_candidates(raw, cap):
            key = normalize_term(gen)
            for cid in candidate_ids:
                if cid not in matched and key in match_keys[cid]:
                    matched.append(cid)
        rest = [cid for cid in candidate_ids if cid not in matched]
        results.append(
            EnrichResult(
                query=query.text,
                ranked_ids=tuple(matched + rest),
                matched_ids=tuple(matched),
                raw_completion=raw,
            )
        )
    return results


def evaluate_enrichment(
    results: Sequence[EnrichResult],
    gold_ids: Sequence[set[str]],
    config_digest: str = "",
) -> EvalReport:
    """Scaled MRR over each query's gold hypernym nodes."""
    if len(results) != len(gold_ids):
        raise DataFormatError(f"{len(results)} results vs {len(gold_ids)} gold sets")
    per_node_ranks = []
    items = []
    for result, gold in zip(results, gold_ids):
        if not gold:
            raise DataFormatError(f"empty gold set for query {result.query!r}")
        ranks = [result.rank_of(g) for g in sorted(gold)]
        per_node_ranks.append(ranks)
        items.append(
            {
                "query": result.query,
                "ranked_ids": list(result.ranked_ids),
                "matched_ids": list(result.matched_ids),
                "gold": sorted(gold),
                "gold_ranks": ranks,
            }
        )
    return EvalReport(
        task="taxonomy-enrichment",
        config_digest=config_digest,
        metrics={"scaled_mrr": metrics.scaled_mrr(per_node_ranks)},
        items=items,
        metadata={"queries": len(results), "unmatched_policy": "rank-infinity (reciprocal 0)"},
    )


def threshold_edges(scores: Sequence[PairScore], threshold: float) -> set[tuple[str, str]]:
    """Edges whose confidence ratio falls below the admission threshold."""
    return {(s.hyponym, s.hypernym) for s in scores if s.confidence < threshold}


def _strongly_connected_components(nodes, adjacency) -> list[set]:
    """Iterative Tarjan SCC."""
    index: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list[set] = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(adjacency.get(root, ())))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, neighbors = work[-1]
            advanced = False
            for nxt in neighbors:
                if nxt not in index:
                    index[nxt] = lowlink[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(adjacency.get(nxt, ()))))
                    advanced = True
                    break
                if nxt in on_stack:
                    lowlink[node] = min(lowlink[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                component = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.add(member)
                    if member == node:
                        break
                components.append(component)
    return components


def _cycle_edges(edges: set[tuple[str, str]]) -> set[tuple[str, str]]:
    """Edges lying on at least one directed cycle (same-SCC endpoints)."""
    adjacency: dict[str, list[str]] = {}
    nodes = sorted({n for e in edges for n in e})
    for child, parent in edges:
        adjacency.setdefault(child, []).append(parent)
    component_of: dict[str, int] = {}
    for idx, comp in enumerate(_strongly_connected_components(nodes, adjacency)):
        for node in comp:
            component_of[node] = idx
    return {
        (c, p) for c, p in edges
        if component_of[c] == component_of[p]
    }


def remove_cycles(
    edges: set[tuple[str, str]], ppl_forward: Mapping[tuple[str, str], float]
) -> set[tuple[str, str]]:
    """Delete cycle edges until acyclic.

    While any directed cycle exists, the edge on a cycle with the highest
    forward perplexity is deleted (ties: the lexicographically larger
    (child, parent) pair goes).
    """
    kept = set(edges)
    while True:
        on_cycle = _cycle_edges(kept)
        if not on_cycle:
            return kept
        victim = max(on_cycle, key=lambda e: (ppl_forward[e], e))
        kept.remove(victim)


def cap_parents(
    edges: set[tuple[str, str]],
    ppl_forward: Mapping[tuple[str, str], float],
    max_parents: int,
) -> set[tuple[str, str]]:
    """Keep at most ``max_parents`` lowest-perplexity parent edges per node."""
    by_child: dict[str, list[tuple[str, str]]] = {}
    for edge in edges:
        by_child.setdefault(edge[0], []).append(edge)
    kept: set[tuple[str, str]] = set()
    for child_edges in by_child.values():
        child_edges.sort(key=lambda e: (ppl_forward[e], e))
        kept.update(child_edges[:max_parents])
    return kept


def construct(
    scorer: PairScorer,
    terms: Sequence[Term],
    root: str,
    cfg: ConstructionConfig,
) -> ConstructionResult:
    """Score all ordered pairs, threshold on confidence, then prune to a DAG."""
    if len(terms) < 2:
        raise ConfigurationError("construct needs at least 2 terms")
    unique: dict[str, Term] = {}
    for term in terms:
        key = normalize_term(term.text)
        unique.setdefault(key, Term(key, term.definition))
    if normalize_term(root) not in unique:
        raise ConfigurationError(f"root {root!r} is not among the input terms")
    names = sorted(unique)
    ordered_pairs = [
        (unique[child], unique[parent])
        for child in names
        for parent in names
        if child != parent
    ]
    scores = scorer.score_pairs(ordered_pairs)
    pair_scores = {(s.hyponym, s.hypernym): s for s in scores}
    admitted = threshold_edges(scores, cfg.threshold)
    ppl = {pair: s.ppl_forward for pair, s in pair_scores.items()}
    acyclic = remove_cycles(admitted, ppl)
    final = cap_parents(acyclic, ppl, cfg.max_parents)
    stats = graph_stats(final, vocabulary=names)
    return ConstructionResult(edges=final, pair_scores=pair_scores, stats=stats)


def graph_stats(
    pred_edges: set[tuple[str, str]],
    vocabulary: Sequence[str] | None = None,
    gold_edges: set[tuple[str, str]] | None = None,
) -> GraphStats:
    """Constructed-graph diagnostics, optionally against the original graph.

    The original-hypernym fields need ``gold_edges``; distances follow the
    hypernym direction inside the constructed graph.
    """
    pred_nodes = {n for e in pred_edges for n in e}
    pred_graph = build_term_graph(pred_edges)
    stats = GraphStats(
        nodes=len(pred_nodes),
        edges=len(pred_edges),
        weak_components=len(pred_graph.weak_components()),
    )
    reference = set(vocabulary) if vocabulary is not None else None
    if gold_edges is not None:
        gold_nodes = {n for e in gold_edges for n in e}
        reference = reference if reference is not None else gold_nodes
        gold_parents: dict[str, set[str]] = {}
        for child, parent in gold_edges:
            gold_parents.setdefault(child, set()).add(parent)
        without_original = 0
        with_path = 0
        without_path = 0
        distances = []
        for node in sorted(pred_nodes):
            parents = gold_parents.get(node, set())
            if not parents:
                without_original += 1
                continue
            best = None
            for parent in sorted(parents):
                if parent not in pred_graph:
                    continue
                dist = pred_graph.shortest_path_len(node, parent, directed=True)
                if dist is not None and (best is None or dist < best):
                    best = dist
            if best is None:
                without_path += 1
            else:
                with_path += 1
                distances.append(best)
        stats.nodes_without_original_hypernym = without_original
        stats.nodes_without_path_to_original = without_path
        stats.nodes_with_path_to_original = with_path
        stats.mean_distance_to_original = (
            sum(distances) / len(distances) if distances else None
        )
    if reference is not None:
        stats.nodes_missing = len(set(reference) - pred_nodes)
    stats.check_identity()
    return stats


def evaluate_construction(
    pred_edges: set[tuple[str, str]],
    gold_edges: set[tuple[str, str]],
    vocabulary: Sequence[str] | None = None,
    config_digest: str = "",
) -> EvalReport:
    if not gold_edges:
        raise DataFormatError("gold edge set is empty")
    pred = {(normalize_term(c), normalize_term(p)) for c, p in pred_edges}
    gold = {(normalize_term(c), normalize_term(p)) for c, p in gold_edges}
    prf = metrics.edge_f1(pred, gold)
    stats = graph_stats(pred, vocabulary=vocabulary, gold_edges=gold)
    return EvalReport(
        task="taxonomy-construction",
        config_digest=config_digest,
        metrics=dict(prf),
        items=[{"edge": [c, p], "in_gold": (c, p) in gold} for c, p in sorted(pred)],
        metadata={"graph_stats": stats.as_dict(), "gold_edges": len(gold)},
    )


def entail_ant(
    scorer: PairScorer,
    pairs: Sequence[tuple[Term, Term]],
    gold_labels: Sequence[int],
    config_digest: str = "",
) -> EvalReport:
    """Binary entailment: AUC_N and AP over negated confidence ratios."""
    if len(pairs) != len(gold_labels):
        raise DataFormatError(f"{len(pairs)} pairs vs {len(gold_labels)} labels")
    scores = scorer.score_pairs(list(pairs))
    probabilities = entailment_probabilities(scores)
    model_scores = [-s.confidence for s in scores]  # higher = more entailing
    labels = [int(bool(l)) for l in gold_labels]
    report_metrics = {
        "auc_norm": metrics.auc_norm(model_scores, labels),
        "average_precision": metrics.average_precision(model_scores, labels),
    }
    items = [
        {**s.as_dict(), "probability": prob, "label": label}
        for s, prob, label in zip(scores, probabilities, labels)
    ]
    return EvalReport(
        task="lexical-entailment-binary",
        config_digest=config_digest,
        metrics=report_metrics,
        items=items,
        metadata={
            "pairs": len(pairs),
            "l2_normalization_scope": "whole test set",
            "ap_tie_policy": AP_TIE_POLICY,
            "auc_norm_formula": AUC_NORM_FORMULA,
        },
    )


def entail_hyperlex(
    scorer: PairScorer,
    pairs: Sequence[tuple[Term, Term]],
    gold_scores: Sequence[float],
    config_digest: str = "",
) -> EvalReport:
    """Graded entailment: Spearman of negated confidence against gold scores."""
    if len(pairs) != len(gold_scores):
        raise DataFormatError(f"{len(pairs)} pairs vs {len(gold_scores)} gold scores")
    scores = scorer.score_pairs(list(pairs))
    model_scores = [-s.confidence for s in scores]
    rho = metrics.spearman(model_scores, list(gold_scores))
    items = [
        {**s.as_dict(), "model_score": m, "gold": g}
        for s, m, g in zip(scores, model_scores, gold_scores)
    ]
    return EvalReport(
        task="lexical-entailment-graded",
        config_digest=config_digest,
        metrics={"spearman": rho},
        items=items,
        metadata={"pairs": len(pairs), "gold_scale": "0-10"},
    )


# --- dataset file readers -----------------------------------------------------

def read_semeval_queries(path: str | Path) -> list[tuple[str, str | None]]:
    """SemEval hypernym-discovery query file: ``term<TAB>type`` per line."""
    queries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            queries.append((parts[0], parts[1] if len(parts) > 1 else None))
    if not queries:
        raise DataFormatError("no queries found", path=str(path))
    return queries


def read_semeval_gold(path: str | Path) -> list[list[str]]:
    """Gold file: tab-separated hypernyms for the same-numbered query line."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            rows.append([h for h in line.split("\t") if h.strip()])
    if not rows:
        raise DataFormatError("no gold rows found", path=str(path))
    return rows


def read_term_edges(path: str | Path) -> set[tuple[str, str]]:
    """TexEval-style edge list: ``term<TAB>hypernym`` per line."""
    edges = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise DataFormatError("expected 'term<TAB>hypernym'", path=str(path), line=lineno)
            edges.add((normalize_term(parts[0]), normalize_term(parts[1])))
    if not edges:
        raise DataFormatError("no edges found", path=str(path))
    return edges


def read_term_list(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        terms = [line.strip() for line in fh if line.strip()]
    if not terms:
        raise DataFormatError("no terms found", path=str(path))
    return terms


def read_ant_pairs(path: str | Path) -> tuple[list[tuple[str, str]], list[int]]:
    """Entailment pairs: ``hyponym<TAB>hypernym<TAB>label`` with binary labels."""
    pairs = []
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataFormatError(
                    "expected 'hyponym<TAB>hypernym<TAB>label'", path=str(path), line=lineno
                )
            if parts[2] not in ("0", "1"):
                raise DataFormatError(f"label must be 0/1, got {parts[2]!r}", path=str(path), line=lineno)
            pairs.append((parts[0], parts[1]))
            labels.append(int(parts[2]))
    if not pairs:
        raise DataFormatError("no pairs found", path=str(path))
    return pairs, labels


def read_hyperlex(path: str | Path) -> tuple[list[tuple[str, str]], list[float]]:
    """HyperLex rows: ``word1 word2 pos score`` (whitespace separated)."""
    pairs = []
    gold = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and parts[0].upper() == "WORD1":
                continue  # header row
            if len(parts) < 4:
                raise DataFormatError(
                    "expected 'word1 word2 pos score'", path=str(path), line=lineno
                )
            try:
                score = float(parts[3])
            except ValueError:
                raise DataFormatError(
                    f"bad score {parts[3]!r}", path=str(path), line=lineno
                ) from None
            if not 0.0 <= score <= 10.0:
                raise DataFormatError(f"score {score} outside [0,10]", path=str(path), line=lineno)
            pairs.append((parts[0], parts[1]))
            gold.append(score)
    if not pairs:
        raise DataFormatError("no rows found", path=str(path))
    return pairs, gold


def write_predictions(preds: Sequence[RankedPrediction], path: str | Path) -> None:
    """One tab-separated candidate list per line, aligned with the queries."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pred in preds:
            fh.write("\t".join(pred.candidates) + "\n")
