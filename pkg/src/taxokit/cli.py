"""Command-line entry point: one executable, one task per run.

Every run is driven by a config file (YAML or JSON) plus a few flag
overrides, and writes an EvalReport JSON whose non-telemetry content is
deterministic for a given config and cache state.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from . import dataset, pipelines, wordnet
from .client import (
    CompletionParams,
    HttpBackend,
    MockBackend,
    ScoreCache,
    ScoringClient,
)
from .dataset import DatasetConfig, DefinitionResolver
from .errors import BackendError, ConfigurationError, DataFormatError, TaxoKitError
from .pipelines import ConstructionConfig
from .ranking import PairScorer, Term
from .reporting import EvalReport
from .textnorm import canonical_json, digest

EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_DATA = 4


def load_config(path: Path) -> dict:
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        config = yaml.safe_load(text)
    elif path.suffix == ".json":
        config = json.loads(text)
    else:
        raise ConfigurationError(f"config must be .yaml/.yml/.json, got {path.suffix}")
    if not isinstance(config, dict):
        raise ConfigurationError("config root must be a mapping")
    return config


def resolve_config(path: Path, kind: str, workers: int | None, seed: int | None) -> dict:
    config = load_config(path)
    task = config.get("task")
    if not isinstance(task, dict) or "kind" not in task:
        raise ConfigurationError("config needs a single 'task' section with a 'kind'")
    if task["kind"] != kind:
        raise ConfigurationError(
            f"config task kind is {task['kind']!r} but the {kind!r} command was invoked"
        )
    if workers is not None:
        config["workers"] = workers
    if seed is not None:
        config["seed"] = seed
    config.setdefault("workers", 1)
    config.setdefault("seed", 0)
    config["_base_dir"] = str(path.parent.resolve())
    return config


def config_digest(config: dict) -> str:
    visible = {k: v for k, v in config.items() if not k.startswith("_")}
    return digest(canonical_json(visible))


def _resolve_path(config: dict, value: str) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = Path(config["_base_dir"]) / path
    return path


def require_file(config: dict, value, what: str, category: str = "data") -> Path:
    """Resolve a referenced path and insist it exists at launch.

    Missing task data files are data errors (exit 4); missing
    infrastructure files (mock tables etc.) are configuration errors.
    """
    if not value:
        raise ConfigurationError(f"config is missing a path for {what}")
    path = _resolve_path(config, str(value))
    if not path.is_file():
        message = f"{what} does not exist: {path}"
        if category == "config":
            raise ConfigurationError(message)
        raise DataFormatError(message)
    return path


def build_client(config: dict, need_scoring: bool = False) -> ScoringClient:
    backend_cfg = config.get("backend") or {}
    kind = backend_cfg.get("kind", "mock" if backend_cfg.get("mock_file") else "http")
    if kind == "mock":
        mock_file = backend_cfg.get("mock_file")
        table = require_file(config, mock_file, "backend.mock_file", category="config") if mock_file else None
        backend = MockBackend(table, fallback=backend_cfg.get("mock_fallback", "error"))
    elif kind == "http":
        if not backend_cfg.get("url") or not backend_cfg.get("model"):
            raise ConfigurationError("http backend needs 'url' and 'model'")
        backend = HttpBackend(
            url=backend_cfg["url"],
            model=backend_cfg["model"],
            auth_env=backend_cfg.get("auth_env"),
            timeout=float(backend_cfg.get("timeout", 120.0)),
            supports_logprobs=bool(backend_cfg.get("supports_logprobs", True)),
        )
    else:
        raise ConfigurationError(f"unknown backend kind {kind!r}")
    cache_cfg = config.get("cache") or {}
    cache_path = cache_cfg.get("path")
    cache = ScoreCache(
        _resolve_path(config, cache_path) if cache_path else None,
        enabled=bool(cache_cfg.get("enabled", True)),
    )
    return ScoringClient(
        backend,
        cache=cache,
        max_workers=int(config["workers"]),
        require_logprobs=need_scoring,
    )


def decoding_params(config: dict) -> CompletionParams:
    decoding = config.get("decoding") or {}
    stop = decoding.get("stop", ["\n"])
    return CompletionParams(
        max_new_tokens=int(decoding.get("max_new_tokens", 32)),
        temperature=float(decoding.get("temperature", 0.0)),
        num_completions=int(decoding.get("num_completions", 1)),
        stop_sequences=tuple(stop) if stop else (),
    )


def definition_resolver(config: dict, task: dict) -> DefinitionResolver | None:
    paths = task.get("definitions") or []
    if not paths:
        return None
    resolved = [require_file(config, p, "definitions file") for p in paths]
    return DefinitionResolver.from_files(resolved)


def _terms_with_definitions(terms, resolver: DefinitionResolver | None) -> list[Term]:
    return [
        Term(t, resolver.lookup(t) if resolver else None)
        for t in terms
    ]


def write_report(report: EvalReport, client: ScoringClient | None, out: str | None,
                 config: dict) -> Path:
    if client is not None:
        report.finalize_run(cache_stats=client.cache_stats(), backend_calls=client.backend_calls)
    else:
        report.finalize_run()
    out_path = Path(out) if out else Path(f"{report.task}_report.json")
    report.save(out_path)
    click.echo(report.render_table())
    click.echo(f"report written to {out_path}")
    return out_path


def announce_dry_run(lines: list[str]) -> None:
    click.echo("dry run; no backend traffic")
    for line in lines:
        click.echo(f"  {line}")


@click.group()
def main():
    """Taxonomy tasks over a completion/logprob language-model backend."""


common_options = [
    click.option("--config", "config_path", required=True, type=click.Path(path_type=Path)),
    click.option("--workers", type=int, default=None, help="override config workers"),
    click.option("--seed", type=int, default=None, help="override config seed"),
    click.option("--out", type=str, default=None, help="report/artifact output path"),
    click.option("--dry-run", is_flag=True, help="print the resolved plan and exit"),
]


def with_common(fn):
    for option in reversed(common_options):
        fn = option(fn)
    return fn


def run_guarded(fn):
    """Map toolkit errors onto process exit codes."""
    try:
        fn()
    except ConfigurationError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    except DataFormatError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except TaxoKitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command("build-dataset")
@with_common
def build_dataset_cmd(config_path, workers, seed, out, dry_run):
    """Export instruction-tuning files from WordNet data files."""

    def run():
        config = resolve_config(config_path, "build-dataset", workers, seed)
        task = config["task"]
        dict_dir = _resolve_path(config, task.get("dict_dir", ""))
        if not dict_dir.is_dir():
            raise ConfigurationError(f"dict_dir does not exist: {dict_dir}")
        pos = frozenset(task.get("pos", ["noun", "verb"]))
        exclude: frozenset[str] = frozenset()
        if task.get("exclude_nodes_file"):
            exclude_path = require_file(config, task["exclude_nodes_file"], "exclude_nodes_file")
            exclude = frozenset(pipelines.read_term_list(exclude_path))
        graph = wordnet.parse_wordnet(dict_dir, pos_filter=pos)
        cfg = DatasetConfig(
            pos_filter=pos,
            sample_size=task.get("sample_size"),
            seed=int(config["seed"]),
            exclude_node_ids=exclude,
            val_fraction=float(task.get("val_fraction", 0.05)),
        )
        if dry_run:
            eligible = sum(
                1 for c, p in graph.edges
                if c not in exclude and p not in exclude
                and graph.synset(c).pos in pos
            )
            announce_dry_run([f"eligible edges: {eligible}",
                              f"requested sample_size: {cfg.sample_size or 'all'}"])
            return
        samples = dataset.build_pairs(graph, cfg)
        out_dir = Path(out) if out else _resolve_path(config, task.get("out_dir", "dataset_out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        train = [s for s in samples if s.split == "train"]
        val = [s for s in samples if s.split == "val"]
        include_defs = bool(task.get("include_definitions", True))
        n_train = dataset.export_training_file(train, out_dir / "train.jsonl", include_defs)
        n_val = dataset.export_training_file(val, out_dir / "val.jsonl", include_defs)
        if task.get("dump_graph", False):
            wordnet.save_graph(graph, out_dir / "nodes.jsonl", out_dir / "edges.tsv")
        stats = dataset.dataset_stats(samples)
        report = EvalReport(
            task="build-dataset",
            config_digest=config_digest(config),
            metrics={k: float(v) for k, v in stats.items()},
            metadata={
                "train_records": n_train,
                "val_records": n_val,
                "graph_nodes": len(graph),
                "graph_edges": len(graph.edges),
                "out_dir": str(out_dir),
            },
        )
        report.finalize_run()
        report.save(out_dir / "dataset_report.json")
        click.echo(report.render_table())
        click.echo(f"dataset written to {out_dir}")

    run_guarded(run)


@main.command("discover")
@with_common
def discover_cmd(config_path, workers, seed, out, dry_run):
    """Hypernym discovery: generate ranked hypernyms per query term."""

    def run():
        config = resolve_config(config_path, "discover", workers, seed)
        task = config["task"]
        queries_path = require_file(config, task.get("queries"), "queries file")
        queries = pipelines.read_semeval_queries(queries_path)
        resolver = definition_resolver(config, task)
        demos: list = []
        k = 0
        if task.get("few_shot"):
            demos_path = require_file(config, task["few_shot"].get("file"), "few_shot.file")
            demos = dataset.load_training_samples(demos_path)
            k = int(task["few_shot"].get("k", 0))
        if dry_run:
            announce_dry_run([f"prompts to send: {len(queries)}"])
            return
        client = build_client(config)
        terms = [
            (term, resolver.lookup(term) if resolver else None)
            for term, _ in queries
        ]
        preds = pipelines.discover_many(
            client, terms, demos, k,
            cap=int(task.get("cap", pipelines.DEFAULT_CANDIDATE_CAP)),
            params=decoding_params(config),
        )
        preds_out = task.get("predictions_out")
        if preds_out:
            pipelines.write_predictions(preds, _resolve_path(config, preds_out))
        if task.get("gold"):
            gold_path = require_file(config, task["gold"], "gold file")
            report = pipelines.evaluate_discovery(preds, gold_path, config_digest(config))
        else:
            report = EvalReport(
                task="hypernym-discovery",
                config_digest=config_digest(config),
                metrics={"queries": float(len(preds))},
                items=[
                    {"query": p.query, "candidates": list(p.candidates)} for p in preds
                ],
                metadata={"gold": None},
            )
        write_report(report, client, out, config)

    run_guarded(run)


@main.command("enrich")
@with_common
def enrich_cmd(config_path, workers, seed, out, dry_run):
    """Taxonomy enrichment: rank existing nodes as parents for new terms."""

    def run():
        config = resolve_config(config_path, "enrich", workers, seed)
        task = config["task"]
        queries_path = require_file(config, task.get("queries"), "queries file")
        queries: list[Term] = []
        gold: list[set[str]] = []
        with open(queries_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    queries.append(Term(record["term"], record.get("definition")))
                    gold.append(set(record.get("gold", [])))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataFormatError(
                        f"bad enrich query: {exc}", path=str(queries_path), line=lineno
                    ) from exc
        nodes_path = require_file(config, task.get("nodes"), "nodes file")
        if nodes_path.suffix == ".jsonl":
            edges = []
            if task.get("edges"):
                edges = wordnet.load_edges(require_file(config, task["edges"], "edges file"))
            graph = wordnet.TaxonomyGraph(wordnet.load_nodes(nodes_path), edges)
        else:
            terms = pipelines.read_term_list(nodes_path)
            graph = wordnet.build_term_graph([], extra_terms=terms)
        candidate_ids = sorted(graph.nodes)
        if dry_run:
            announce_dry_run([
                f"prompts to send: {len(queries)}",
                f"candidate nodes: {len(candidate_ids)}",
            ])
            return
        client = build_client(config)
        results = pipelines.enrich_many(
            client, queries, candidate_ids, graph,
            params=decoding_params(config),
            cap=int(task.get("cap", pipelines.DEFAULT_CANDIDATE_CAP)),
        )
        if any(gold):
            report = pipelines.evaluate_enrichment(results, gold, config_digest(config))
        else:
            report = EvalReport(
                task="taxonomy-enrichment",
                config_digest=config_digest(config),
                metrics={"queries": float(len(results))},
                items=[
                    {"query": r.query, "ranked_ids": list(r.ranked_ids)} for r in results
                ],
                metadata={"gold": None},
            )
        write_report(report, client, out, config)

    run_guarded(run)


@main.command("construct")
@with_common
def construct_cmd(config_path, workers, seed, out, dry_run):
    """Taxonomy construction: induce an edge set over a term list."""

    def run():
        config = resolve_config(config_path, "construct", workers, seed)
        task = config["task"]
        terms_path = require_file(config, task.get("terms"), "terms file")
        terms = pipelines.read_term_list(terms_path)
        root = task.get("root")
        if not root:
            raise ConfigurationError("construct needs a 'root' term")
        cfg = ConstructionConfig(
            threshold=float(task["threshold"]) if "threshold" in task else 0.0,
            max_parents=int(task.get("max_parents", 3)),
        )
        resolver = definition_resolver(config, task)
        term_objs = _terms_with_definitions(terms, resolver)
        n = len({t.text for t in term_objs})
        if dry_run:
            announce_dry_run([f"ordered pairs to score: {n * (n - 1)}"])
            return
        client = build_client(config, need_scoring=True)
        scorer = PairScorer(client, include_definitions=bool(task.get("use_definitions", True)))
        result = pipelines.construct(scorer, term_objs, root, cfg)
        edges_out = task.get("edges_out")
        if edges_out:
            edges_path = _resolve_path(config, edges_out)
            with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
                for child, parent in sorted(result.edges):
                    fh.write(f"{child}\t{parent}\n")
        if task.get("gold"):
            gold_path = require_file(config, task["gold"], "gold edges file")
            gold_edges = pipelines.read_term_edges(gold_path)
            report = pipelines.evaluate_construction(
                result.edges, gold_edges,
                vocabulary=[t.text for t in term_objs],
                config_digest=config_digest(config),
            )
        else:
            report = EvalReport(
                task="taxonomy-construction",
                config_digest=config_digest(config),
                metrics={"edges": float(len(result.edges))},
                items=[{"edge": [c, p]} for c, p in sorted(result.edges)],
                metadata={"graph_stats": result.stats.as_dict()},
            )
        report.metadata["threshold"] = cfg.threshold
        report.metadata["max_parents"] = cfg.max_parents
        write_report(report, client, out, config)

    run_guarded(run)


@main.command("entail")
@with_common
def entail_cmd(config_path, workers, seed, out, dry_run):
    """Lexical entailment: binary (AP/AUC_N) or graded (Spearman) evaluation."""

    def run():
        config = resolve_config(config_path, "entail", workers, seed)
        task = config["task"]
        dataset_kind = task.get("dataset")
        if dataset_kind not in ("ant", "hyperlex"):
            raise ConfigurationError("entail task needs dataset: ant | hyperlex")
        pairs_path = require_file(config, task.get("pairs"), "pairs file")
        resolver = definition_resolver(config, task)

        def to_terms(pairs):
            return [
                (
                    Term(a, resolver.lookup(a) if resolver else None),
                    Term(b, resolver.lookup(b) if resolver else None),
                )
                for a, b in pairs
            ]

        if dataset_kind == "ant":
            pairs, labels = pipelines.read_ant_pairs(pairs_path)
        else:
            pairs, gold_scores = pipelines.read_hyperlex(pairs_path)
        if dry_run:
            announce_dry_run([f"scorings to run: {2 * len(pairs)}"])
            return
        client = build_client(config, need_scoring=True)
        scorer = PairScorer(client, include_definitions=bool(task.get("use_definitions", True)))
        if dataset_kind == "ant":
            report = pipelines.entail_ant(scorer, to_terms(pairs), labels, config_digest(config))
        else:
            report = pipelines.entail_hyperlex(
                scorer, to_terms(pairs), gold_scores, config_digest(config)
            )
        write_report(report, client, out, config)

    run_guarded(run)


@main.command("stats")
@with_common
def stats_cmd(config_path, workers, seed, out, dry_run):
    """Constructed-graph diagnostics over edge files; no backend calls."""

    def run():
        config = resolve_config(config_path, "stats", workers, seed)
        task = config["task"]
        pred_path = require_file(config, task.get("pred_edges"), "pred_edges file")
        pred = pipelines.read_term_edges(pred_path)
        gold = None
        if task.get("gold_edges"):
            gold = pipelines.read_term_edges(require_file(config, task["gold_edges"], "gold_edges"))
        vocabulary = None
        if task.get("terms"):
            vocabulary = pipelines.read_term_list(require_file(config, task["terms"], "terms file"))
        if dry_run:
            announce_dry_run([f"pred edges: {len(pred)}"])
            return
        stats = pipelines.graph_stats(pred, vocabulary=vocabulary, gold_edges=gold)
        report = EvalReport(
            task="graph-stats",
            config_digest=config_digest(config),
            metrics={
                k: float(v)
                for k, v in stats.as_dict().items()
                if isinstance(v, (int, float)) and v is not None
            },
            metadata={"graph_stats": stats.as_dict()},
        )
        write_report(report, None, out, config)

    run_guarded(run)


@main.command("eval")
@with_common
def eval_cmd(config_path, workers, seed, out, dry_run):
    """Re-compute metrics from prediction files; never calls a backend."""

    def run():
        config = resolve_config(config_path, "eval", workers, seed)
        task = config["task"]
        eval_task = task.get("eval_task")
        if eval_task == "discovery":
            preds_path = require_file(config, task.get("preds"), "preds file")
            gold_path = require_file(config, task.get("gold"), "gold file")
            preds = []
            with open(preds_path, encoding="utf-8") as fh:
                for idx, line in enumerate(fh):
                    candidates = tuple(c for c in line.rstrip("\n").split("\t") if c)
                    preds.append(
                        pipelines.RankedPrediction(
                            query=f"line-{idx + 1}", candidates=candidates, raw_completion=""
                        )
                    )
            if dry_run:
                announce_dry_run([f"prediction lines: {len(preds)}"])
                return
            report = pipelines.evaluate_discovery(preds, gold_path, config_digest(config))
        elif eval_task == "construction":
            pred_path = require_file(config, task.get("preds"), "preds file")
            gold_path = require_file(config, task.get("gold"), "gold file")
            if dry_run:
                announce_dry_run(["edge-set comparison only"])
                return
            report = pipelines.evaluate_construction(
                pipelines.read_term_edges(pred_path),
                pipelines.read_term_edges(gold_path),
                config_digest=config_digest(config),
            )
        else:
            raise ConfigurationError("eval task needs eval_task: discovery | construction")
        write_report(report, None, out, config)

    run_guarded(run)


if __name__ == "__main__":
    main()
