"""Lexical baseline: BM25 over listing titles.

Scoring follows the Lucene convention: idf = ln(1 + (N - df + 0.5) /
(df + 0.5)) with k1 = 1.2 and b = 0.75 defaults. Documents scoring zero for a
query are omitted from results.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field

from .walks import RankedResult

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric run; drops empty tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[int, int]]]  # term -> [(doc position, tf)]
    doc_ids: list[str]
    doc_lengths: list[int]
    avg_doc_length: float
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)


def build_index(
    docs: list[tuple[str, str]], k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> Bm25Index:
    """Index (listing_id, title) pairs; a repeated listing_id keeps the last title."""
    if k1 < 0 or not 0 <= b <= 1:
        raise ValueError("k1 must be non-negative and b within [0, 1]")
    latest: dict[str, str] = {}
    for doc_id, title in docs:
        latest[doc_id] = title
    doc_ids = sorted(latest)
    doc_lengths: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for position, doc_id in enumerate(doc_ids):
        tokens = tokenize(latest[doc_id])
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, tf in counts.items():
            postings.setdefault(token, []).append((position, tf))
    total = sum(doc_lengths)
    if doc_ids and total == 0:
        warnings.warn("all titles tokenized to nothing; index is empty", stacklevel=2)
    avg = total / len(doc_ids) if doc_ids else 0.0
    return Bm25Index(
        postings=postings,
        doc_ids=doc_ids,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        k1=k1,
        b=b,
    )


def search(index: Bm25Index, query: str, k: int = 1000) -> RankedResult:
    """Top-k documents by BM25 score; ties broken by ascending listing id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scores: dict[int, float] = {}
    n = index.doc_count
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        df = len(plist)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for position, tf in plist:
            if index.avg_doc_length > 0:
                norm = 1.0 - index.b + index.b * (
                    index.doc_lengths[position] / index.avg_doc_length
                )
            else:
                norm = 1.0
            gain = idf * tf * (index.k1 + 1.0) / (tf + index.k1 * norm)
            scores[position] = scores.get(position, 0.0) + gain
    ranked = sorted(
        ((index.doc_ids[position], score) for position, score in scores.items() if score > 0.0),
        key=lambda entry: (-entry[1], entry[0]),
    )
    return RankedResult(query=query, results=tuple(ranked[:k]))
