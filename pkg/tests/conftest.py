"""Shared fixtures: the worked three-row log and small random-graph helpers."""
from __future__ import annotations

import json
import random

import numpy as np
import pytest

from xwalk.builder import CollatedPair, build_graph, collate, parse_interaction_log
from xwalk.model import CsrGraph, NodeKind, NodeRef

TABLE_ROWS = [
    {"query": "wedding dress", "listing_id": "l12", "interaction": "click",
     "shop_id": "s00", "tags": ["white", "gown"],
     "title": "beautiful bridal wedding gown"},
    {"query": "wedding gown", "listing_id": "l12", "interaction": "purchase",
     "shop_id": "s00", "tags": ["white", "gown"],
     "title": "custom embroidered wedding dress"},
    {"query": "wedding dress", "listing_id": "l34", "interaction": "click",
     "shop_id": "s11", "tags": ["fancy", "dress", "chiffon"],
     "title": "ethereal champagne dress with chiffon skirt"},
]


@pytest.fixture
def table_lines() -> list[str]:
    return [json.dumps(row) for row in TABLE_ROWS]


@pytest.fixture
def table_graph(table_lines):
    pairs, meta = collate(parse_interaction_log(table_lines))
    return build_graph(pairs, meta, extend=True)


@pytest.fixture
def table_graph_plain(table_lines):
    pairs, meta = collate(parse_interaction_log(table_lines))
    return build_graph(pairs, meta, extend=False)


def random_pairs(rng: random.Random, n_queries: int = 6, n_listings: int = 8,
                 max_pairs: int = 20) -> list[CollatedPair]:
    """Random collated pairs guaranteed to include at least one positive count."""
    pairs = []
    seen = set()
    for _ in range(rng.randint(1, max_pairs)):
        q = f"q{rng.randrange(n_queries)}"
        l = f"l{rng.randrange(n_listings)}"
        if (q, l) in seen:
            continue
        seen.add((q, l))
        pairs.append(CollatedPair(
            query=q, listing_id=l,
            clicks=rng.randint(1, 5), carts=rng.randint(0, 2),
            purchases=rng.randint(0, 2),
        ))
    return pairs


def star_graph(weights) -> CsrGraph:
    """One query node 0 connected to len(weights) listings, weights as given.

    Weights must be sorted non-increasing to satisfy the arc-order invariant.
    """
    weights = np.asarray(weights, dtype=np.float64)
    d = weights.shape[0]
    nodes = [NodeRef(0, NodeKind.QUERY, "q")]
    nodes += [NodeRef(i + 1, NodeKind.LISTING, f"l{i:07d}") for i in range(d)]
    offsets = np.concatenate([[0], [d], d + np.arange(1, d + 1)]).astype(np.int64)
    targets = np.concatenate([np.arange(1, d + 1), np.zeros(d)]).astype(np.int64)
    cumulative = np.cumsum(weights)
    cdf = np.concatenate([cumulative / cumulative[-1], np.ones(d)])
    return CsrGraph(nodes=nodes, offsets=offsets, targets=targets, cdf=cdf)


def exact_hop_distribution(graph: CsrGraph, start: int, hops: int) -> np.ndarray:
    """Oracle: exact node-visit distribution after `hops` hops.

    Rebuilds per-node transition probabilities directly from cdf differences
    and applies them `hops` times; independent of the sampling code paths.
    """
    n = graph.node_count
    dist = np.zeros(n)
    dist[start] = 1.0
    for _ in range(hops):
        nxt = np.zeros(n)
        for node in range(n):
            if dist[node] == 0.0:
                continue
            lo, hi = int(graph.offsets[node]), int(graph.offsets[node + 1])
            if lo == hi:
                continue
            slice_cdf = np.asarray(graph.cdf[lo:hi])
            probs = np.diff(np.concatenate([[0.0], slice_cdf]))
            for t, p in zip(graph.targets[lo:hi], probs):
                nxt[int(t)] += dist[node] * p
        dist = nxt
    return dist
