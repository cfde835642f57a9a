"""Interaction-log ETL: parse, collate, weight, and pack into a CSR graph.

The input is newline-delimited JSON, one interaction per line, with fields
``query``, ``listing_id``, ``interaction`` (click|cart|purchase), ``shop_id``,
``tags`` (array of strings) and optional ``title``. Edge weight for a
query/listing pair is a linear combination of its click, cart and purchase
counts; shop and tag extension edges carry unit weight.
"""
from __future__ import annotations

import json
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from .model import CsrGraph, NodeKind, NodeRef, validate_graph

_WS_RE = re.compile(r"\s+")

# Default interaction weights: purchases dominate carts dominate clicks.
DEFAULT_COEFFICIENTS = (1.0, 3.0, 10.0)

# Parsing aborts when more than this fraction of lines is malformed.
MAX_MALFORMED_FRACTION = 0.01


def normalize_query(text: str) -> str:
    """Trim, collapse internal whitespace, and lowercase a query string."""
    return _WS_RE.sub(" ", text.strip()).lower()


class Interaction(Enum):
    CLICK = "click"
    CART = "cart"
    PURCHASE = "purchase"


@dataclass(frozen=True)
class InteractionRecord:
    query: str
    listing_id: str
    interaction: Interaction
    shop_id: str
    tags: tuple[str, ...]
    title: str | None = None


@dataclass
class CollatedPair:
    """Per (query text, listing) interaction counts."""

    query: str
    listing_id: str
    clicks: int = 0
    carts: int = 0
    purchases: int = 0


@dataclass
class ListingMeta:
    shop_id: str
    tags: tuple[str, ...]
    title: str | None = None


@dataclass(frozen=True)
class WeightCoefficients:
    clicks: float = DEFAULT_COEFFICIENTS[0]
    carts: float = DEFAULT_COEFFICIENTS[1]
    purchases: float = DEFAULT_COEFFICIENTS[2]

    def __post_init__(self) -> None:
        values = (self.clicks, self.carts, self.purchases)
        if any(v < 0 for v in values):
            raise ValueError("weight coefficients must be non-negative")
        if not any(values):
            raise ValueError("at least one weight coefficient must be positive")
        if not (self.clicks < self.carts < self.purchases):
            warnings.warn(
                "coefficients do not satisfy clicks < carts < purchases; "
                "edge weights may invert the intended interaction ordering",
                stacklevel=2,
            )


class LogParseError(Exception):
    """Raised when the malformed-line fraction exceeds the threshold."""

    def __init__(self, malformed: int, total: int, samples: list[tuple[int, str]]):
        self.malformed = malformed
        self.total = total
        self.samples = samples
        detail = "; ".join(f"line {ln}: {msg}" for ln, msg in samples[:3])
        super().__init__(
            f"{malformed} of {total} lines malformed "
            f"(> {MAX_MALFORMED_FRACTION:.0%} threshold): {detail}"
        )


def _record_from_json(obj: object) -> InteractionRecord:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    try:
        query = obj["query"]
        listing_id = obj["listing_id"]
        interaction = obj["interaction"]
        shop_id = obj["shop_id"]
        tags = obj["tags"]
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]!r}") from exc
    if not isinstance(query, str) or not query.strip():
        raise ValueError("'query' must be a non-empty string")
    if not isinstance(listing_id, str) or not listing_id:
        raise ValueError("'listing_id' must be a non-empty string")
    try:
        kind = Interaction(interaction)
    except ValueError:
        raise ValueError(f"unknown interaction {interaction!r}") from None
    if not isinstance(shop_id, str):
        raise ValueError("'shop_id' must be a string")
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ValueError("'tags' must be an array of strings")
    title = obj.get("title")
    if title is not None and not isinstance(title, str):
        raise ValueError("'title' must be a string when present")
    return InteractionRecord(
        query=query,
        listing_id=listing_id,
        interaction=kind,
        shop_id=shop_id,
        tags=tuple(tags),
        title=title,
    )


def parse_interaction_log(
    lines: Iterable[str],
    max_error_rate: float = MAX_MALFORMED_FRACTION,
    errors: list[tuple[int, str]] | None = None,
) -> Iterator[InteractionRecord]:
    """Yield records from JSONL lines, tolerating sparse malformed lines.

    Malformed lines are collected into ``errors`` (line number, message) and
    skipped; once the stream is exhausted, LogParseError is raised if their
    fraction exceeds ``max_error_rate``. Blank lines are ignored.
    """
    collected: list[tuple[int, str]] = errors if errors is not None else []
    total = 0
    malformed = 0
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            yield _record_from_json(json.loads(line))
        except ValueError as exc:
            malformed += 1
            collected.append((line_no, str(exc)))
    if total and malformed / total > max_error_rate:
        raise LogParseError(malformed, total, collected)


def collate(
    records: Iterable[InteractionRecord],
) -> tuple[list[CollatedPair], dict[str, ListingMeta]]:
    """Group records into per-(query, listing) counts plus listing metadata.

    Metadata keeps the last seen shop/tags/title per listing; a later record
    without a title does not erase an earlier one.
    """
    pairs: dict[tuple[str, str], CollatedPair] = {}
    meta: dict[str, ListingMeta] = {}
    for record in records:
        key = (record.query, record.listing_id)
        pair = pairs.get(key)
        if pair is None:
            pair = pairs[key] = CollatedPair(record.query, record.listing_id)
        if record.interaction is Interaction.CLICK:
            pair.clicks += 1
        elif record.interaction is Interaction.CART:
            pair.carts += 1
        else:
            pair.purchases += 1
        existing = meta.get(record.listing_id)
        title = record.title if record.title is not None else (
            existing.title if existing else None
        )
        meta[record.listing_id] = ListingMeta(
            shop_id=record.shop_id, tags=record.tags, title=title
        )
    return list(pairs.values()), meta


def edge_weight(pair: CollatedPair, coefficients: WeightCoefficients) -> float:
    """Linear interaction weight for one query/listing pair."""
    return (
        coefficients.clicks * pair.clicks
        + coefficients.carts * pair.carts
        + coefficients.purchases * pair.purchases
    )


def build_graph(
    pairs: Iterable[CollatedPair],
    metadata: dict[str, ListingMeta] | None = None,
    coefficients: WeightCoefficients | None = None,
    extend: bool = True,
    normalize: bool = True,
) -> CsrGraph:
    """Pack collated pairs (and optional shop/tag extension) into a CsrGraph.

    Node ids are assigned deterministically: queries first, then listings,
    shops, tags, each group sorted by key, so the output is independent of
    input pair ordering. Pairs whose weight is zero are dropped with a
    warning. Extension edges (listing-shop, listing-tag) carry weight 1.
    """
    metadata = metadata or {}
    coefficients = coefficients or WeightCoefficients()

    merged: dict[tuple[str, str], list[int]] = defaultdict(lambda: [0, 0, 0])
    for pair in pairs:
        query = normalize_query(pair.query) if normalize else pair.query
        counts = merged[(query, pair.listing_id)]
        counts[0] += pair.clicks
        counts[1] += pair.carts
        counts[2] += pair.purchases

    weighted: dict[tuple[str, str], float] = {}
    for (query, listing_id), (clicks, carts, purchases) in merged.items():
        weight = edge_weight(
            CollatedPair(query, listing_id, clicks, carts, purchases), coefficients
        )
        if weight <= 0.0:
            warnings.warn(
                f"dropping zero-weight pair ({query!r}, {listing_id!r})",
                stacklevel=2,
            )
            continue
        weighted[(query, listing_id)] = weight
    if not weighted:
        raise ValueError("no pairs with positive weight; cannot build a graph")

    queries = sorted({query for query, _ in weighted})
    listings = sorted({listing_id for _, listing_id in weighted})
    shops: list[str] = []
    tags: list[str] = []
    if extend:
        shop_set: set[str] = set()
        tag_set: set[str] = set()
        for listing_id in listings:
            info = metadata.get(listing_id)
            if info is None:
                continue
            if info.shop_id:
                shop_set.add(info.shop_id)
            tag_set.update(t for t in info.tags if t)
        shops = sorted(shop_set)
        tags = sorted(tag_set)

    nodes: list[NodeRef] = []
    ids: dict[tuple[NodeKind, str], int] = {}
    for kind, keys in (
        (NodeKind.QUERY, queries),
        (NodeKind.LISTING, listings),
        (NodeKind.SHOP, shops),
        (NodeKind.TAG, tags),
    ):
        for key in keys:
            node_id = len(nodes)
            nodes.append(NodeRef(id=node_id, kind=kind, key=key))
            ids[(kind, key)] = node_id

    adjacency: list[list[tuple[int, float]]] = [[] for _ in nodes]

    def add_edge(a: int, b: int, weight: float) -> None:
        adjacency[a].append((b, weight))
        adjacency[b].append((a, weight))

    for (query, listing_id), weight in weighted.items():
        add_edge(ids[(NodeKind.QUERY, query)], ids[(NodeKind.LISTING, listing_id)], weight)
    if extend:
        for listing_id in listings:
            info = metadata.get(listing_id)
            if info is None:
                continue
            listing_node = ids[(NodeKind.LISTING, listing_id)]
            if info.shop_id:
                add_edge(ids[(NodeKind.SHOP, info.shop_id)], listing_node, 1.0)
            for tag in sorted({t for t in info.tags if t}):
                add_edge(ids[(NodeKind.TAG, tag)], listing_node, 1.0)

    offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
    target_parts: list[np.ndarray] = []
    cdf_parts: list[np.ndarray] = []
    for node_id, arcs in enumerate(adjacency):
        offsets[node_id + 1] = offsets[node_id] + len(arcs)
        if not arcs:
            continue
        arc_targets = np.array([t for t, _ in arcs], dtype=np.int64)
        arc_weights = np.array([w for _, w in arcs], dtype=np.float64)
        order = np.lexsort((arc_targets, -arc_weights))
        arc_targets = arc_targets[order]
        arc_weights = arc_weights[order]
        cumulative = np.cumsum(arc_weights)
        target_parts.append(arc_targets)
        cdf_parts.append(cumulative / cumulative[-1])

    targets = np.concatenate(target_parts) if target_parts else np.zeros(0, np.int64)
    cdf = np.concatenate(cdf_parts) if cdf_parts else np.zeros(0, np.float64)
    graph = CsrGraph(nodes=nodes, offsets=offsets, targets=targets, cdf=cdf)
    validate_graph(graph)
    return graph
