"""Command-line entry points: index, run, eval, ablate."""

from __future__ import annotations

import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import click

from . import expansion
from .corpus import CorpusFormatError, ingest_corpus
from .evaluate import Qrels, RunFile, TrecFormatError, evaluate_run
from .expansion import ChatCompletionsBackend, GenerationParams, MockBackend
from .index import Bm25Params, PostingIndex, build_index
from .pipeline import PipelineConfig, run_pipeline


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _resolve(flag_value, config: dict, key: str, default):
    """Flag wins over config file, config file over the built-in default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _read_queries(path: str) -> list[tuple[str, str]]:
    queries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t", 1)
            if len(parts) != 2:
                raise click.ClickException(f"{path}:{line_no}: expected qid<TAB>text")
            queries.append((parts[0], parts[1]))
    return queries


def _prompt_template_hash() -> str:
    blob = (expansion.PROMPT_HEADER + expansion.PROMPT_FOOTER).encode()
    return hashlib.sha256(blob).hexdigest()


@click.group()
def main():
    """Iterative thinking-based query expansion over a BM25 index."""


@main.command("index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["jsonl", "tsv"]), default="jsonl")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--k1", type=float, default=0.9, show_default=True)
@click.option("--b", type=float, default=0.4, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite an existing index file.")
def cmd_index(corpus_path, fmt, out_path, k1, b, force):
    """Ingest a corpus and persist a BM25 index."""
    if os.path.exists(out_path) and not force:
        raise click.ClickException(f"{out_path} exists; pass --force to rebuild")
    if not os.path.exists(corpus_path):
        raise click.ClickException(f"corpus file not found: {corpus_path}")
    try:
        corpus = ingest_corpus(corpus_path, fmt)
        index = build_index(corpus, Bm25Params(k1=k1, b=b))
    except (CorpusFormatError, ValueError) as exc:
        raise click.ClickException(str(exc))
    index.save(out_path)
    click.echo(
        f"indexed doc_count={index.doc_count} term_count={len(index.term_postings)} "
        f"avg_doc_length={index.avg_doc_length:.2f} -> {out_path}"
    )


def _pipeline_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True), default=None),
        click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True)),
        click.option("--format", "fmt", type=click.Choice(["jsonl", "tsv"]), default="jsonl"),
        click.option("--index", "index_path", required=True, type=click.Path(exists=True)),
        click.option("--queries", "queries_path", required=True, type=click.Path(exists=True)),
        click.option("--out-dir", required=True, type=click.Path()),
        click.option("--rounds", type=int, default=None),
        click.option("--samples", type=int, default=None),
        click.option("--top-k", type=int, default=None),
        click.option("--truncate", type=int, default=None),
        click.option("--lambda", "lambda_", type=float, default=None),
        click.option("--depth", type=int, default=None),
        click.option("--no-accumulation", is_flag=True),
        click.option("--no-filter", is_flag=True),
        click.option("--backend", type=click.Choice(["mock", "http"]), default=None),
        click.option("--mock-mode", type=click.Choice(["echo_terms", "fixed_text"]), default=None),
        click.option("--fixed-text", default=None),
        click.option("--seed", type=int, default=None),
        click.option("--base-url", default=None),
        click.option("--model", default=None),
        click.option("--key-env", default=None),
        click.option("--thinking-mode", type=click.Choice(["think", "no_think_prefill", "base_model"]), default=None),
        click.option("--temperature", type=float, default=None),
        click.option("--workers", type=int, default=1, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_backend(cfg: dict):
    if cfg["backend"] == "mock":
        return MockBackend(
            mode=cfg["mock_mode"], seed=cfg["seed"], fixed_text=cfg["fixed_text"]
        )
    api_key = os.environ.get(cfg["key_env"], "") if cfg["key_env"] else ""
    return ChatCompletionsBackend(
        base_url=cfg["base_url"], model=cfg["model"], api_key=api_key
    )


def _resolve_run_config(config_path, kwargs) -> dict:
    file_cfg = _load_config_file(config_path)
    defaults = {
        "rounds": 3, "samples": 2, "top_k": 5, "truncate": 128, "lambda_": 3.0,
        "depth": 1000, "mode": "interaction", "backend": "mock",
        "mock_mode": "echo_terms", "fixed_text": "mock expansion", "seed": 0,
        "base_url": "", "model": "", "key_env": "ITERQE_API_KEY",
        "thinking_mode": "think", "temperature": 0.7,
    }
    cfg = {}
    for key, default in defaults.items():
        cfg[key] = _resolve(kwargs.get(key), file_cfg, key, default)
    cfg["accumulation_enabled"] = not kwargs.get("no_accumulation") and file_cfg.get(
        "accumulation_enabled", True
    )
    cfg["filter_enabled"] = not kwargs.get("no_filter") and file_cfg.get(
        "filter_enabled", True
    )
    if cfg["backend"] == "http" and not cfg["base_url"]:
        raise click.ClickException("--base-url is required with the http backend")
    return cfg


def _execute_batch(corpus, index, queries, cfg, out_dir, run_name, workers=1):
    """Run the pipeline over all queries and write run/trace/metadata files."""
    os.makedirs(out_dir, exist_ok=True)
    pipe_cfg = PipelineConfig(
        rounds=cfg["rounds"],
        top_k_feedback=cfg["top_k"],
        prompt_doc_truncation=cfg["truncate"],
        samples_per_round=cfg["samples"],
        lambda_=cfg["lambda_"],
        mode=cfg["mode"],
        accumulation_enabled=cfg["accumulation_enabled"],
        filter_enabled=cfg["filter_enabled"],
        retrieval_depth=cfg["depth"],
    )
    gen_params = GenerationParams(
        temperature=cfg["temperature"], thinking_mode=cfg["thinking_mode"]
    )
    backend = _build_backend(cfg)

    def one(item):
        qid, text = item
        hits, trace = run_pipeline(text, corpus, index, backend, pipe_cfg, gen_params)
        return qid, hits, trace

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, queries))
    else:
        results = [one(q) for q in queries]
    results.sort(key=lambda r: r[0])

    run = RunFile(tag=run_name)
    trace_path = os.path.join(out_dir, f"{run_name}.trace.jsonl")
    with open(trace_path, "w", encoding="utf-8") as tf:
        for qid, hits, trace in results:
            for hit in hits:
                run.add(qid, hit.doc_id, hit.score)
            for record in trace:
                entry = {"query_id": qid, **record.to_dict()}
                tf.write(json.dumps(entry) + "\n")
    run_path = os.path.join(out_dir, f"{run_name}.run.txt")
    run.write(run_path)

    metadata = {
        "run_name": run_name,
        "config": {**cfg, "pipeline": asdict(pipe_cfg)},
        "prompt_template_sha256": _prompt_template_hash(),
        "backend": backend.describe(),
        "generation_calls": backend.generation_calls,
        "query_count": len(queries),
    }
    meta_path = os.path.join(out_dir, f"{run_name}.metadata.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
    return run_path, metadata


@main.command("run")
@_pipeline_options
@click.option("--mode", type=click.Choice(["interaction", "parallel"]), default=None)
@click.option("--run-name", default="iterqe")
def cmd_run(config_path, corpus_path, fmt, index_path, queries_path, out_dir,
            workers, run_name, **kwargs):
    """Execute the expansion pipeline over a query set and write a TREC run."""
    cfg = _resolve_run_config(config_path, kwargs)
    corpus = ingest_corpus(corpus_path, fmt)
    index = PostingIndex.load(index_path)
    queries = _read_queries(queries_path)
    run_path, metadata = _execute_batch(
        corpus, index, queries, cfg, out_dir, run_name, workers
    )
    click.echo(
        f"wrote {run_path} ({metadata['query_count']} queries, "
        f"{metadata['generation_calls']} generation calls)"
    )


@main.command("eval")
@click.option("--run", "run_path", required=True, type=click.Path(exists=True))
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=int, default=1, show_default=True,
              help="Minimum grade counted as relevant for mAP/recall.")
@click.option("--json", "json_path", type=click.Path(), default=None)
def cmd_eval(run_path, qrels_path, threshold, json_path):
    """Score a TREC run against qrels (mAP, nDCG@10, Recall@1000)."""
    try:
        run = RunFile.read(run_path)
        qrels = Qrels.read(qrels_path)
        result = evaluate_run(run, qrels, binary_threshold=threshold)
    except (TrecFormatError, ValueError) as exc:
        raise click.ClickException(str(exc))
    metrics = list(result.means)
    click.echo(f"{'query':<12}" + "".join(f"{m:>14}" for m in metrics))
    for qid in sorted(result.per_query):
        row = result.per_query[qid]
        click.echo(f"{qid:<12}" + "".join(f"{row[m]:>14.4f}" for m in metrics))
    click.echo(f"{'mean':<12}" + "".join(f"{result.means[m]:>14.4f}" for m in metrics))
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump({"per_query": result.per_query, "means": result.means}, fh, indent=2)


ABLATION_CELLS = {
    "full": {"accumulation_enabled": True, "filter_enabled": True, "mode": "interaction"},
    "accum_only": {"accumulation_enabled": True, "filter_enabled": False, "mode": "interaction"},
    "filter_only": {"accumulation_enabled": False, "filter_enabled": True, "mode": "interaction"},
    "parallel": {"accumulation_enabled": True, "filter_enabled": True, "mode": "parallel"},
}


@main.command("ablate")
@_pipeline_options
@click.option("--qrels", "qrels_path", type=click.Path(exists=True), default=None)
@click.option("--cells", default="full,accum_only,filter_only,parallel",
              show_default=True, help="Comma-separated ablation cells to execute.")
def cmd_ablate(config_path, corpus_path, fmt, index_path, queries_path, out_dir,
               workers, qrels_path, cells, **kwargs):
    """Run the accumulation/filter ablation grid plus the parallel-scaling baseline."""
    cell_names = [c.strip() for c in cells.split(",") if c.strip()]
    unknown = [c for c in cell_names if c not in ABLATION_CELLS]
    if unknown:
        raise click.ClickException(f"unknown ablation cells: {', '.join(unknown)}")
    base_cfg = _resolve_run_config(config_path, kwargs)
    corpus = ingest_corpus(corpus_path, fmt)
    index = PostingIndex.load(index_path)
    queries = _read_queries(queries_path)
    qrels = Qrels.read(qrels_path) if qrels_path else None

    summary = []
    for cell in cell_names:
        cfg = {**base_cfg, **ABLATION_CELLS[cell]}
        run_path, metadata = _execute_batch(
            corpus, index, queries, cfg, out_dir, f"ablate_{cell}", workers
        )
        row = {"cell": cell, "run": run_path,
               "generation_calls": metadata["generation_calls"]}
        if qrels is not None:
            result = evaluate_run(RunFile.read(run_path), qrels)
            row.update(result.means)
        summary.append(row)

    cols = list(summary[0])
    click.echo("  ".join(f"{c:<18}" for c in cols))
    for row in summary:
        click.echo("  ".join(
            f"{row[c]:<18.4f}" if isinstance(row[c], float) else f"{str(row[c]):<18}"
            for c in cols
        ))
    with open(os.path.join(out_dir, "ablation_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)


if __name__ == "__main__":
    sys.exit(main())
