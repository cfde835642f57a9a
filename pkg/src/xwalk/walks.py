"""Breadth-first multi-hop random-walk retrieval over the interaction graph.

Retrieval dispatches ``num_walks`` walks from a query node and ranks listings
by how often the walks visit them after an odd number of hops. Each level of
the expansion samples a node's outgoing arcs with the configured sampler and
forwards the per-target visit counts to the next level, so total mass is
conserved from the first level to the last.
"""
from __future__ import annotations

import hashlib
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .builder import normalize_query
from .model import CsrGraph, NodeKind, lookup_node
from .sampling import DeadEndError, ProbeStats, SamplerConfig, sample_edges

WalkCounter = Counter  # node id -> visit count; merging counters sums counts

_MASK64 = (1 << 64) - 1


class ColdStartError(Exception):
    """The query has no node in the graph (never seen in the training log)."""

    def __init__(self, query: str):
        self.query = query
        super().__init__(f"cold start: query not in graph: {query!r}")


@dataclass(frozen=True)
class WalkParams:
    num_walks: int = 1000
    hops: int = 3
    top_k: int = 1000
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self) -> None:
        if self.num_walks < 1:
            raise ValueError("num_walks must be at least 1")
        if self.hops < 1 or self.hops % 2 == 0:
            raise ValueError("hops must be an odd positive number")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")


@dataclass(frozen=True)
class RankedResult:
    """Listings ordered by descending score, ties by ascending listing id."""

    query: str
    results: tuple[tuple[str, float], ...]


def _spread(
    graph: CsrGraph,
    node: int,
    count: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    m: int,
    stats: ProbeStats | None,
    sink: Counter,
) -> None:
    """Sample ``count`` arcs of ``node`` and add target visits into ``sink``."""
    local = sample_edges(graph, node, count, config, rng, m, stats)
    lo = int(graph.offsets[node])
    targets = graph.targets
    for index, visits in local.counts.items():
        sink[int(targets[lo + index])] += visits


def xwalk_bfs(
    graph: CsrGraph,
    start: int,
    c: int,
    k: int,
    config: SamplerConfig,
    rng: np.random.Generator,
    m: int = 1,
    stats: ProbeStats | None = None,
) -> Counter:
    """Expand k + 1 hop levels from ``start``; returns the final level's counter.

    The first draw at the start node is credited ``m``; every recursive level
    redistributes each node's accumulated count with a first-draw credit of 1,
    so for m = 1 the returned counter's total equals ``c`` exactly. Levels are
    processed breadth-first; nodes within a level in ascending id order for a
    reproducible RNG consumption sequence.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    level: Counter = Counter()
    _spread(graph, start, c, config, rng, m, stats, level)
    for _ in range(k):
        following: Counter = Counter()
        for node in sorted(level):
            try:
                _spread(graph, node, level[node], config, rng, 1, stats, following)
            except DeadEndError:
                warnings.warn(
                    f"dropping {level[node]} walk(s) stranded at arcless node {node}",
                    stacklevel=2,
                )
        level = following
    return level


def retrieve(
    graph: CsrGraph,
    query_text: str,
    params: WalkParams | None = None,
    rng: np.random.Generator | None = None,
    stats: ProbeStats | None = None,
) -> RankedResult:
    """Rank listings for a query by walk visit counts.

    The query text is normalized with the builder's rule before lookup. With
    an odd hop count every walk terminates on the listing side, so the
    listing-kind filter below never discards mass.
    """
    params = params or WalkParams()
    if rng is None:
        rng = params.sampler.make_rng()
    text = normalize_query(query_text)
    start = lookup_node(graph, NodeKind.QUERY, text)
    if start is None:
        raise ColdStartError(text)
    counter = xwalk_bfs(
        graph, start, params.num_walks, params.hops - 1, params.sampler, rng,
        m=1, stats=stats,
    )
    entries: list[tuple[str, int]] = []
    for node_id, visits in counter.items():
        node = graph.nodes[node_id]
        if node.kind is not NodeKind.LISTING:
            raise RuntimeError(
                f"walk of {params.hops} hops ended on {node.kind.name} node {node_id}"
            )
        entries.append((node.key, visits))
    entries.sort(key=lambda entry: (-entry[1], entry[0]))
    return RankedResult(query=text, results=tuple(entries[: params.top_k]))


def derive_query_seed(base_seed: int, query_text: str) -> int:
    """Stable per-query seed: 64-bit mix of the base seed and the text hash."""
    digest = hashlib.blake2b(query_text.encode("utf-8"), digest_size=8).digest()
    return _splitmix64((base_seed + int.from_bytes(digest, "little")) & _MASK64)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def batch_retrieve(
    graph: CsrGraph,
    queries: list[str],
    params: WalkParams | None = None,
    base_seed: int = 0,
) -> tuple[list[RankedResult | None], list[tuple[int, str]]]:
    """Retrieve for many queries with per-query seeds derived from the text.

    Results align with the input order; failed queries yield None and an
    (index, message) entry in the error list. Because each seed depends only
    on the normalized text and the base seed, a query's result is independent
    of the rest of the batch, and duplicate texts produce identical results.
    """
    params = params or WalkParams()
    results: list[RankedResult | None] = []
    errors: list[tuple[int, str]] = []
    cache: dict[str, RankedResult] = {}
    for position, query in enumerate(queries):
        text = normalize_query(query)
        cached = cache.get(text)
        if cached is not None:
            results.append(cached)
            continue
        rng = np.random.default_rng(derive_query_seed(base_seed, text))
        try:
            result = retrieve(graph, text, params, rng)
        except ColdStartError as exc:
            results.append(None)
            errors.append((position, str(exc)))
            continue
        cache[text] = result
        results.append(result)
    return results, errors
