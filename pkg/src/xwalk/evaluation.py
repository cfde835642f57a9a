"""Retrieval-quality harness: metrics, popularity bins, rank fusion, reports.

File interchange follows the TREC conventions, whitespace-separated:

    run lines:         qid Q0 docid rank score tag
    qrels lines:       qid 0 docid 1
    frequency lines:   qid count
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

Qrels = dict[str, set[str]]
# Per query: (doc id, score) entries in rank order, duplicate-free.
RunList = dict[str, list[tuple[str, float]]]

DEFAULT_RRF_KAPPA = 60


class PopularityBin(Enum):
    TAIL = "tail"
    TORSO = "torso"
    HEAD = "head"


@dataclass(frozen=True)
class FrequencyBinAssignment:
    bins: dict[str, PopularityBin]
    frequencies: dict[str, int]


class FileFormatError(Exception):
    """A run/qrels/frequencies file line failed to parse."""

    def __init__(self, path: str | Path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def recall_at_k(run: RunList, qrels: Qrels, k: int) -> float:
    """Mean over qrels queries of |relevant ∩ top-k| / |relevant|."""
    _check_metric_args(run, qrels, k)
    total = 0.0
    for qid, relevant in qrels.items():
        retrieved = {doc for doc, _ in run.get(qid, [])[:k]}
        total += len(retrieved & relevant) / len(relevant)
    return total / len(qrels)


def map_at_k(run: RunList, qrels: Qrels, k: int) -> float:
    """Mean average precision at k with the |relevant| denominator."""
    _check_metric_args(run, qrels, k)
    total = 0.0
    for qid, relevant in qrels.items():
        hits = 0
        precision_sum = 0.0
        for rank, (doc, _) in enumerate(run.get(qid, [])[:k], start=1):
            if doc in relevant:
                hits += 1
                precision_sum += hits / rank
        total += precision_sum / len(relevant)
    return total / len(qrels)


def _check_metric_args(run: RunList, qrels: Qrels, k: int) -> None:
    if k < 1:
        raise ValueError("k must be at least 1")
    if not qrels:
        raise ValueError("qrels must contain at least one query")
    if any(not relevant for relevant in qrels.values()):
        raise ValueError("every qrels query needs at least one relevant doc")
    extra = set(run) - set(qrels)
    if extra:
        warnings.warn(
            f"{len(extra)} run query(ies) not in qrels are ignored", stacklevel=3
        )


def assign_bins(frequencies: dict[str, int]) -> FrequencyBinAssignment:
    """Split queries into tail/torso/head with roughly equal request mass.

    Queries are sorted by ascending frequency (ties by ascending key); a
    query goes to tail while the running mass stays within a third of the
    total, to torso within two thirds, else to head.
    """
    if not frequencies:
        raise ValueError("frequencies must not be empty")
    if any(count < 0 for count in frequencies.values()):
        raise ValueError("frequencies must be non-negative")
    total = sum(frequencies.values())
    if total == 0:
        raise ValueError("at least one query needs a positive frequency")
    bins: dict[str, PopularityBin] = {}
    running = 0
    for key in sorted(frequencies, key=lambda q: (frequencies[q], q)):
        running += frequencies[key]
        if running * 3 <= total:
            bins[key] = PopularityBin.TAIL
        elif running * 3 <= 2 * total:
            bins[key] = PopularityBin.TORSO
        else:
            bins[key] = PopularityBin.HEAD
    return FrequencyBinAssignment(bins=bins, frequencies=dict(frequencies))


def rrf_fuse(runs: list[RunList], kappa: int = DEFAULT_RRF_KAPPA) -> RunList:
    """Reciprocal-rank fusion: score(d) = sum over runs of 1 / (kappa + rank)."""
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if not runs:
        raise ValueError("need at least one run to fuse")
    fused: RunList = {}
    queries = sorted({qid for run in runs for qid in run})
    for qid in queries:
        scores: dict[str, float] = {}
        for run in runs:
            for rank, (doc, _) in enumerate(run.get(qid, []), start=1):
                scores[doc] = scores.get(doc, 0.0) + 1.0 / (kappa + rank)
        fused[qid] = sorted(scores.items(), key=lambda entry: (-entry[1], entry[0]))
    return fused


@dataclass(frozen=True)
class EvalReport:
    """Per-run overall metrics and recall@1000 stratified by popularity bin."""

    overall: dict[str, dict[str, float]]
    by_bin: dict[str, dict[PopularityBin, float]]
    bin_sizes: dict[PopularityBin, int]

    def machine_lines(self) -> list[str]:
        lines = []
        for run_name, metrics in self.overall.items():
            for metric, value in metrics.items():
                lines.append(f"{run_name}.{metric}={value:.6f}")
            for bin_, value in self.by_bin[run_name].items():
                lines.append(f"{run_name}.recall@1000.{bin_.value}={value:.6f}")
        return lines

    def render(self) -> str:
        metric_names = ["recall@100", "recall@1000", "map@100", "map@1000"]
        bin_order = [PopularityBin.TAIL, PopularityBin.TORSO, PopularityBin.HEAD]
        headers = ["run", *metric_names, *[f"{b.value} r@1000" for b in bin_order]]
        rows = []
        for run_name, metrics in self.overall.items():
            row = [run_name]
            row += [f"{metrics[name]:.4f}" for name in metric_names]
            row += [f"{self.by_bin[run_name][b]:.4f}" for b in bin_order]
            rows.append(row)
        widths = [
            max(len(headers[i]), *(len(row[i]) for row in rows)) for i in range(len(headers))
        ]
        def fmt(row: list[str]) -> str:
            return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        lines = [fmt(headers), fmt(["-" * w for w in widths])]
        lines += [fmt(row) for row in rows]
        return "\n".join(lines)


def evaluate(
    runs: list[tuple[str, RunList]],
    qrels: Qrels,
    bins: FrequencyBinAssignment,
) -> EvalReport:
    """Score each named run overall and per popularity bin (recall@1000)."""
    if not runs:
        raise ValueError("need at least one run to evaluate")
    missing = set(qrels) - set(bins.bins)
    if missing:
        raise ValueError(f"{len(missing)} qrels query(ies) have no bin assignment")
    overall: dict[str, dict[str, float]] = {}
    by_bin: dict[str, dict[PopularityBin, float]] = {}
    bin_queries: dict[PopularityBin, Qrels] = {b: {} for b in PopularityBin}
    for qid, relevant in qrels.items():
        bin_queries[bins.bins[qid]][qid] = relevant
    for run_name, run in runs:
        overall[run_name] = {
            "recall@100": recall_at_k(run, qrels, 100),
            "recall@1000": recall_at_k(run, qrels, 1000),
            "map@100": map_at_k(run, qrels, 100),
            "map@1000": map_at_k(run, qrels, 1000),
        }
        by_bin[run_name] = {}
        for b, subset in bin_queries.items():
            if not subset:
                by_bin[run_name][b] = float("nan")
                continue
            # slice the run so queries outside this bin are not flagged
            sliced = {qid: run[qid] for qid in subset if qid in run}
            by_bin[run_name][b] = recall_at_k(sliced, subset, 1000)
    sizes = {b: len(subset) for b, subset in bin_queries.items()}
    return EvalReport(overall=overall, by_bin=by_bin, bin_sizes=sizes)


# ---------------------------------------------------------------------------
# TREC-style file IO
# ---------------------------------------------------------------------------


def write_run(path: str | Path, run: RunList, tag: str = "xwalk") -> None:
    with open(path, "w", encoding="utf-8") as sink:
        for qid in run:
            for rank, (doc, score) in enumerate(run[qid], start=1):
                sink.write(f"{qid} Q0 {doc} {rank} {score} {tag}\n")


def read_run(path: str | Path) -> RunList:
    """Read a TREC run file; entries are ordered by their rank field."""
    per_query: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as source:
        for line_no, line in enumerate(source, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FileFormatError(path, line_no, "expected 6 fields")
            qid, _, doc, rank_text, score_text, _ = parts
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError:
                raise FileFormatError(
                    path, line_no, "rank/score fields must be numeric"
                ) from None
            per_query.setdefault(qid, []).append((rank, doc, score))
    run: RunList = {}
    for qid, entries in per_query.items():
        entries.sort(key=lambda entry: entry[0])
        seen: set[str] = set()
        ordered: list[tuple[str, float]] = []
        for _, doc, score in entries:
            if doc in seen:
                warnings.warn(f"duplicate doc {doc} for query {qid}; keeping first")
                continue
            seen.add(doc)
            ordered.append((doc, score))
        run[qid] = ordered
    return run


def write_qrels(path: str | Path, qrels: Qrels) -> None:
    with open(path, "w", encoding="utf-8") as sink:
        for qid in sorted(qrels):
            for doc in sorted(qrels[qid]):
                sink.write(f"{qid} 0 {doc} 1\n")


def read_qrels(path: str | Path) -> Qrels:
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as source:
        for line_no, line in enumerate(source, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FileFormatError(path, line_no, "expected 4 fields")
            qid, _, doc, label = parts
            try:
                relevant = int(label)
            except ValueError:
                raise FileFormatError(path, line_no, "label must be an integer") from None
            if relevant:
                qrels.setdefault(qid, set()).add(doc)
    return qrels


def write_frequencies(path: str | Path, frequencies: dict[str, int]) -> None:
    with open(path, "w", encoding="utf-8") as sink:
        for qid in sorted(frequencies):
            sink.write(f"{qid} {frequencies[qid]}\n")


def read_frequencies(path: str | Path) -> dict[str, int]:
    frequencies: dict[str, int] = {}
    with open(path, encoding="utf-8") as source:
        for line_no, line in enumerate(source, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FileFormatError(path, line_no, "expected 2 fields")
            try:
                frequencies[parts[0]] = int(parts[1])
            except ValueError:
                raise FileFormatError(path, line_no, "count must be an integer") from None
    return frequencies
