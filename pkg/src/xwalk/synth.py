"""Synthetic interaction-log generator for the retrieval desk experiments.

Queries follow a Zipf popularity law over ranks. Queries and listings live in
latent clusters; each cluster exposes a small "active pool" of listings that
absorbs the non-noise interaction mass, and a tag pool whose words appear in
both listing titles and query texts so the lexical baseline has signal.
Holdout purchases drawn from the same per-query affinity become the
relevance judgments for a non-deduplicated evaluation sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .builder import Interaction, InteractionRecord

# Listings per cluster that receive direct interaction mass.
ACTIVE_POOL_TARGET = 96
# Fraction of interactions that ignore the query's cluster.
NOISE_RATE = 0.08
# Mild skew inside an active pool; keeps pool membership stable under walks.
POOL_SKEW = 0.3
# Popularity skew of noise interactions across the whole catalog.
NOISE_SKEW = 1.2

_INTERACTION_MIX = (0.9035, 0.0619, 0.0346)  # click, cart, purchase
_RELEVANT_COUNT_MIX = (0.823, 0.120, 0.057)  # 1, 2, 3 holdout purchases
_TAG_POOL_SIZE = 10
_TITLE_TAGS = 3
_QUERY_TAGS = 2


@dataclass(frozen=True)
class SyntheticLogSpec:
    num_queries: int = 1000
    num_listings: int = 10000
    num_shops: int = 100
    tag_vocab_size: int = 200
    cluster_count: int = 20
    zipf_exponent: float = 1.0
    events: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("num_queries", "num_listings", "num_shops", "tag_vocab_size",
                     "cluster_count", "events"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf_exponent must be positive")
        if self.cluster_count > self.num_queries:
            raise ValueError("cluster_count must not exceed num_queries")
        if self.cluster_count > self.num_listings:
            raise ValueError("cluster_count must not exceed num_listings")


@dataclass
class SyntheticDataset:
    records: list[InteractionRecord]
    qrels: dict[str, set[str]]
    eval_queries: list[tuple[str, str]]  # (instance id, query text)
    frequencies: dict[str, int]  # instance id -> training frequency of its text
    text_frequencies: dict[str, int]
    event_query_ranks: np.ndarray = field(repr=False)
    query_texts: list[str] = field(repr=False)
    listing_ids: list[str] = field(repr=False)
    query_cluster: np.ndarray = field(repr=False)
    listing_cluster: np.ndarray = field(repr=False)


def _power_pmf(n: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, n + 1, dtype=np.float64) ** -exponent
    return weights / weights.sum()


def generate_synthetic_log(
    spec: SyntheticLogSpec, eval_count: int = 500
) -> SyntheticDataset:
    """Generate a training log, eval sample and holdout-purchase qrels."""
    if eval_count < 1:
        raise ValueError("eval_count must be at least 1")
    rng = np.random.default_rng(spec.seed)
    n_q, n_l, n_c = spec.num_queries, spec.num_listings, spec.cluster_count

    query_cluster = np.arange(n_q, dtype=np.int64) % n_c
    listing_cluster = np.arange(n_l, dtype=np.int64) % n_c
    cluster_listings = [np.flatnonzero(listing_cluster == k) for k in range(n_c)]
    pools = [ids[: min(ACTIVE_POOL_TARGET, ids.shape[0])] for ids in cluster_listings]
    pool_weights = [_power_pmf(pool.shape[0], POOL_SKEW) for pool in pools]

    tag_pool_size = min(_TAG_POOL_SIZE, spec.tag_vocab_size)
    cluster_tags = [
        rng.choice(spec.tag_vocab_size, size=tag_pool_size, replace=False)
        for _ in range(n_c)
    ]

    listing_ids = [f"l{j:05d}" for j in range(n_l)]
    listing_shop = [f"s{j % spec.num_shops}" for j in range(n_l)]
    listing_tags: list[tuple[str, ...]] = []
    listing_title: list[str] = []
    for j in range(n_l):
        pool = cluster_tags[listing_cluster[j]]
        picked = rng.choice(pool, size=min(_TITLE_TAGS, tag_pool_size), replace=False)
        tags = tuple(f"tag{t}" for t in sorted(picked.tolist()))
        listing_tags.append(tags)
        listing_title.append(" ".join(tags) + f" item{j}")

    query_texts: list[str] = []
    for i in range(n_q):
        pool = cluster_tags[query_cluster[i]]
        picked = rng.choice(pool, size=min(_QUERY_TAGS, tag_pool_size), replace=False)
        words = " ".join(f"tag{t}" for t in sorted(picked.tolist()))
        query_texts.append(f"{words} q{i}")

    zipf_pmf = _power_pmf(n_q, spec.zipf_exponent)
    event_queries = rng.choice(n_q, size=spec.events, p=zipf_pmf)
    noise_mask = rng.random(spec.events) < NOISE_RATE
    interaction_codes = rng.choice(3, size=spec.events, p=_INTERACTION_MIX)

    noise_perm = rng.permutation(n_l)
    noise_pmf = _power_pmf(n_l, NOISE_SKEW)

    event_listings = np.zeros(spec.events, dtype=np.int64)
    noise_positions = rng.choice(n_l, size=int(noise_mask.sum()), p=noise_pmf)
    event_listings[noise_mask] = noise_perm[noise_positions]
    for k in range(n_c):
        take = (~noise_mask) & (query_cluster[event_queries] == k)
        count = int(take.sum())
        if not count:
            continue
        pool, weights = pools[k], pool_weights[k]
        positions = rng.choice(pool.shape[0], size=count, p=weights)
        shifts = (event_queries[take] // n_c) % pool.shape[0]
        event_listings[take] = pool[(positions + shifts) % pool.shape[0]]

    interactions = (Interaction.CLICK, Interaction.CART, Interaction.PURCHASE)
    records = [
        InteractionRecord(
            query=query_texts[q],
            listing_id=listing_ids[j],
            interaction=interactions[t],
            shop_id=listing_shop[j],
            tags=listing_tags[j],
            title=listing_title[j],
        )
        for q, j, t in zip(
            event_queries.tolist(), event_listings.tolist(), interaction_codes.tolist()
        )
    ]

    text_counts = np.bincount(event_queries, minlength=n_q)
    text_frequencies = {
        query_texts[i]: int(text_counts[i]) for i in range(n_q) if text_counts[i]
    }

    eval_ranks = rng.choice(n_q, size=eval_count, p=zipf_pmf)
    relevant_counts = rng.choice(
        np.array([1, 2, 3]), size=eval_count, p=_RELEVANT_COUNT_MIX
    )
    eval_queries: list[tuple[str, str]] = []
    qrels: dict[str, set[str]] = {}
    frequencies: dict[str, int] = {}
    for position, (q, n_rel) in enumerate(
        zip(eval_ranks.tolist(), relevant_counts.tolist())
    ):
        instance = f"q{position:05d}"
        k = int(query_cluster[q])
        pool, weights = pools[k], pool_weights[k]
        shift = (q // n_c) % pool.shape[0]
        positions = rng.choice(
            pool.shape[0], size=min(n_rel, pool.shape[0]), replace=False, p=weights
        )
        purchased = pool[(positions + shift) % pool.shape[0]]
        eval_queries.append((instance, query_texts[q]))
        qrels[instance] = {listing_ids[j] for j in purchased.tolist()}
        frequencies[instance] = int(text_counts[q])

    return SyntheticDataset(
        records=records,
        qrels=qrels,
        eval_queries=eval_queries,
        frequencies=frequencies,
        text_frequencies=text_frequencies,
        event_query_ranks=event_queries,
        query_texts=query_texts,
        listing_ids=listing_ids,
        query_cluster=query_cluster,
        listing_cluster=listing_cluster,
    )


DEFAULT_SPEC = SyntheticLogSpec()
