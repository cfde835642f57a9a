"""Command-line workflows over the retrieval library.

Exit codes: 0 success, 1 usage or validation failure, 2 IO or parse failure,
3 cold-start query. The XWALK_GRAPH environment variable supplies the default
graph path for commands that read one.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import builder, evaluation
from .model import GraphError, deserialize_graph, serialize_graph, NodeKind
from .sampling import SamplerConfig
from .service import ServiceConfig, serve as run_service
from .synth import SyntheticLogSpec, generate_synthetic_log
from .walks import ColdStartError, WalkParams, batch_retrieve, retrieve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_COLD_START = 3

# Spec'd code for usage problems; click defaults to 2.
click.UsageError.exit_code = EXIT_USAGE


def _fail(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load_graph(path: str):
    try:
        with open(path, "rb") as source:
            return deserialize_graph(source)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read graph: {exc}")
    except GraphError as exc:
        _fail(EXIT_IO, f"invalid graph file: {exc}")


def _walk_params(walks: int, hops: int, topk: int, sampler: str, sigma2: float) -> WalkParams:
    try:
        config = SamplerConfig(proposal_variance=sigma2, method=sampler)
        return WalkParams(num_walks=walks, hops=hops, top_k=topk, sampler=config)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))


def _resolve_seed(seed: int, random_seed: bool) -> int:
    if random_seed:
        return int.from_bytes(os.urandom(8), "little")
    return seed


@click.group()
def main() -> None:
    """Random-walk candidate retrieval over an interaction graph."""


@main.command()
@click.argument("log_path", type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(), help="Graph file to write.")
@click.option("--c1", default=1.0, show_default=True, help="Click weight coefficient.")
@click.option("--c2", default=3.0, show_default=True, help="Cart weight coefficient.")
@click.option("--c3", default=10.0, show_default=True, help="Purchase weight coefficient.")
@click.option("--extend/--no-extend", default=True, show_default=True,
              help="Attach shop and tag nodes with unit-weight edges.")
def build(log_path: str, output: str, c1: float, c2: float, c3: float, extend: bool) -> None:
    """Build a graph file from a JSONL interaction log."""
    try:
        coefficients = builder.WeightCoefficients(clicks=c1, carts=c2, purchases=c3)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    try:
        with open(log_path, encoding="utf-8") as source:
            pairs, metadata = builder.collate(builder.parse_interaction_log(source))
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read log: {exc}")
    except builder.LogParseError as exc:
        _fail(EXIT_IO, str(exc))
    try:
        graph = builder.build_graph(pairs, metadata, coefficients, extend=extend)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    try:
        with open(output, "wb") as sink:
            written = serialize_graph(graph, sink)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write graph: {exc}")
    by_kind = {kind: 0 for kind in NodeKind}
    for node in graph.nodes:
        by_kind[node.kind] += 1
    click.echo(f"queries: {by_kind[NodeKind.QUERY]}")
    click.echo(f"listings: {by_kind[NodeKind.LISTING]}")
    click.echo(f"shops: {by_kind[NodeKind.SHOP]}")
    click.echo(f"tags: {by_kind[NodeKind.TAG]}")
    click.echo(f"nodes: {graph.node_count}")
    click.echo(f"edges: {graph.arc_count // 2}")
    click.echo(f"bytes: {written}")


@main.command()
@click.argument("query_text")
@click.option("--graph", "graph_path", envvar="XWALK_GRAPH", required=True,
              type=click.Path(), help="Graph file (or set XWALK_GRAPH).")
@click.option("--walks", default=1000, show_default=True)
@click.option("--hops", default=3, show_default=True)
@click.option("--topk", default=1000, show_default=True)
@click.option("--sampler", default="mh", show_default=True, type=click.Choice(["mh", "its"]))
@click.option("--sigma2", default=0.2, show_default=True, help="Proposal variance.")
@click.option("--seed", default=0, show_default=True)
@click.option("--random-seed", is_flag=True, help="Seed from OS entropy instead of --seed.")
@click.option("--run-output", type=click.Path(), default=None,
              help="Also write results as a TREC run file.")
@click.option("--run-tag", default="xwalk", show_default=True)
@click.option("--qid", default="q0", show_default=True, help="Query id for the run file.")
def query(query_text: str, graph_path: str, walks: int, hops: int, topk: int,
          sampler: str, sigma2: float, seed: int, random_seed: bool,
          run_output: str | None, run_tag: str, qid: str) -> None:
    """Rank listings for one query; prints 'listing score' lines."""
    params = _walk_params(walks, hops, topk, sampler, sigma2)
    graph = _load_graph(graph_path)
    rng = np.random.default_rng(_resolve_seed(seed, random_seed))
    try:
        result = retrieve(graph, query_text, params, rng)
    except ColdStartError:
        _fail(EXIT_COLD_START, "cold start: query not in graph")
    for listing, score in result.results:
        click.echo(f"{listing} {score}")
    if run_output is not None:
        try:
            evaluation.write_run(run_output, {qid: list(result.results)}, tag=run_tag)
        except OSError as exc:
            _fail(EXIT_IO, f"cannot write run: {exc}")


@main.command("batch-query")
@click.argument("queries_path", type=click.Path())
@click.option("--graph", "graph_path", envvar="XWALK_GRAPH", required=True, type=click.Path())
@click.option("-o", "--output", required=True, type=click.Path(), help="TREC run file to write.")
@click.option("--walks", default=1000, show_default=True)
@click.option("--hops", default=3, show_default=True)
@click.option("--topk", default=1000, show_default=True)
@click.option("--sampler", default="mh", show_default=True, type=click.Choice(["mh", "its"]))
@click.option("--sigma2", default=0.2, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Base seed; per-query seeds derive from it.")
@click.option("--run-tag", default="xwalk", show_default=True)
def batch_query(queries_path: str, graph_path: str, output: str, walks: int, hops: int,
                topk: int, sampler: str, sigma2: float, seed: int, run_tag: str) -> None:
    """Retrieve for a TSV of 'qid<TAB>query text' lines into one run file."""
    params = _walk_params(walks, hops, topk, sampler, sigma2)
    graph = _load_graph(graph_path)
    instances: list[tuple[str, str]] = []
    try:
        with open(queries_path, encoding="utf-8") as source:
            for line_no, line in enumerate(source, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    _fail(EXIT_IO, f"{queries_path}:{line_no}: expected 'qid<TAB>query'")
                instances.append((parts[0], parts[1]))
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read queries: {exc}")
    results, errors = batch_retrieve(graph, [text for _, text in instances], params, seed)
    run: evaluation.RunList = {}
    for (instance_id, _), result in zip(instances, results):
        if result is not None:
            run[instance_id] = list(result.results)
    try:
        evaluation.write_run(output, run, tag=run_tag)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write run: {exc}")
    click.echo(f"queries: {len(instances)}")
    click.echo(f"answered: {len(run)}")
    click.echo(f"cold: {len(errors)}")


@main.command("eval")
@click.argument("run_paths", nargs=-1, required=True, type=click.Path())
@click.option("--qrels", "qrels_path", required=True, type=click.Path())
@click.option("--frequencies", "freq_path", required=True, type=click.Path())
def eval_runs(run_paths: tuple[str, ...], qrels_path: str, freq_path: str) -> None:
    """Score one or more TREC run files against qrels, stratified by bin."""
    try:
        runs = [(Path(p).stem, evaluation.read_run(p)) for p in run_paths]
        qrels = evaluation.read_qrels(qrels_path)
        frequencies = evaluation.read_frequencies(freq_path)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read input: {exc}")
    except evaluation.FileFormatError as exc:
        _fail(EXIT_IO, str(exc))
    try:
        bins = evaluation.assign_bins(frequencies)
        report = evaluation.evaluate(runs, qrels, bins)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    click.echo(report.render())
    for line in report.machine_lines():
        click.echo(line)


@main.command()
@click.argument("run_paths", nargs=-1, required=True, type=click.Path())
@click.option("--kappa", default=evaluation.DEFAULT_RRF_KAPPA, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--run-tag", default="rrf", show_default=True)
def fuse(run_paths: tuple[str, ...], kappa: int, output: str, run_tag: str) -> None:
    """Fuse run files with reciprocal-rank fusion into one run file."""
    if kappa < 1:
        _fail(EXIT_USAGE, "kappa must be at least 1")
    try:
        runs = [evaluation.read_run(p) for p in run_paths]
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read run: {exc}")
    except evaluation.FileFormatError as exc:
        _fail(EXIT_IO, str(exc))
    fused = evaluation.rrf_fuse(runs, kappa)
    try:
        evaluation.write_run(output, fused, tag=run_tag)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write run: {exc}")


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--num-queries", default=1000, show_default=True)
@click.option("--num-listings", default=10000, show_default=True)
@click.option("--num-shops", default=100, show_default=True)
@click.option("--tag-vocab-size", default=200, show_default=True)
@click.option("--cluster-count", default=20, show_default=True)
@click.option("--zipf-exponent", default=1.0, show_default=True)
@click.option("--events", default=100_000, show_default=True)
@click.option("--eval-count", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out_dir: str, num_queries: int, num_listings: int, num_shops: int,
          tag_vocab_size: int, cluster_count: int, zipf_exponent: float,
          events: int, eval_count: int, seed: int) -> None:
    """Write a synthetic log, qrels, frequencies and eval queries to a directory."""
    try:
        spec = SyntheticLogSpec(
            num_queries=num_queries, num_listings=num_listings, num_shops=num_shops,
            tag_vocab_size=tag_vocab_size, cluster_count=cluster_count,
            zipf_exponent=zipf_exponent, events=events, seed=seed,
        )
        dataset = generate_synthetic_log(spec, eval_count=eval_count)
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "log.ndjson", "w", encoding="utf-8") as sink:
            for record in dataset.records:
                sink.write(json.dumps({
                    "query": record.query,
                    "listing_id": record.listing_id,
                    "interaction": record.interaction.value,
                    "shop_id": record.shop_id,
                    "tags": list(record.tags),
                    "title": record.title,
                }) + "\n")
        evaluation.write_qrels(out / "qrels.txt", dataset.qrels)
        evaluation.write_frequencies(out / "frequencies.txt", dataset.frequencies)
        with open(out / "queries.tsv", "w", encoding="utf-8") as sink:
            for instance_id, text in dataset.eval_queries:
                sink.write(f"{instance_id}\t{text}\n")
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write dataset: {exc}")
    click.echo(f"events: {len(dataset.records)}")
    click.echo(f"eval queries: {len(dataset.eval_queries)}")


@main.command()
@click.option("--graph", "graph_path", envvar="XWALK_GRAPH", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--walks", default=1000, show_default=True)
@click.option("--hops", default=3, show_default=True)
@click.option("--topk", default=1000, show_default=True)
@click.option("--timeout-ms", default=30_000, show_default=True)
def serve(graph_path: str, host: str, port: int, walks: int, hops: int,
          topk: int, timeout_ms: int) -> None:
    """Serve GET /retrieve and GET /health over a prebuilt graph."""
    params = _walk_params(walks, hops, topk, "mh", 0.2)
    if not Path(graph_path).exists():
        _fail(EXIT_IO, f"graph file not found: {graph_path}")
    try:
        config = ServiceConfig(
            graph_path=graph_path, host=host, port=port, defaults=params,
            request_timeout_ms=timeout_ms,
        )
    except ValueError as exc:
        _fail(EXIT_USAGE, str(exc))
    try:
        run_service(config)
    except GraphError as exc:
        _fail(EXIT_IO, f"invalid graph file: {exc}")


if __name__ == "__main__":
    main()
