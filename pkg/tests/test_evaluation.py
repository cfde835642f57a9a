"""Metrics against brute-force re-computation, bin mass balance, fusion, IO."""
from __future__ import annotations

import math
import random

import pytest

from xwalk.evaluation import (
    DEFAULT_RRF_KAPPA,
    FileFormatError,
    PopularityBin,
    assign_bins,
    evaluate,
    map_at_k,
    read_frequencies,
    read_qrels,
    read_run,
    recall_at_k,
    rrf_fuse,
    write_frequencies,
    write_qrels,
    write_run,
)


def _run(entries: dict[str, list[str]]):
    # scores are decorative for metric purposes; rank order is what counts
    return {
        qid: [(doc, float(len(docs) - i)) for i, doc in enumerate(docs)]
        for qid, docs in entries.items()
    }


# ---------------------------------------------------------------------------
# recall / MAP
# ---------------------------------------------------------------------------


def test_recall_worked_example():
    run = _run({"q1": ["a", "b", "c", "d"]})
    qrels = {"q1": {"a", "c", "x"}}
    assert recall_at_k(run, qrels, 2) == pytest.approx(1 / 3)
    assert recall_at_k(run, qrels, 4) == pytest.approx(2 / 3)


def test_map_worked_example():
    # relevant at ranks 1 and 3 of 2 relevant total: (1/1 + 2/3) / 2
    run = _run({"q1": ["a", "b", "c"]})
    qrels = {"q1": {"a", "c"}}
    assert map_at_k(run, qrels, 3) == pytest.approx((1.0 + 2 / 3) / 2)
    assert map_at_k(run, qrels, 1) == pytest.approx(0.5)


def test_query_absent_from_run_scores_zero():
    run = _run({"q1": ["a"]})
    qrels = {"q1": {"a"}, "q2": {"b"}}
    assert recall_at_k(run, qrels, 10) == pytest.approx(0.5)
    assert map_at_k(run, qrels, 10) == pytest.approx(0.5)


def test_extra_run_queries_warn_but_do_not_count():
    run = _run({"q1": ["a"], "q9": ["z"]})
    qrels = {"q1": {"a"}}
    with pytest.warns(UserWarning, match="not in qrels"):
        assert recall_at_k(run, qrels, 5) == pytest.approx(1.0)


def test_metric_argument_validation():
    run = _run({"q1": ["a"]})
    with pytest.raises(ValueError):
        recall_at_k(run, {"q1": {"a"}}, 0)
    with pytest.raises(ValueError):
        recall_at_k(run, {}, 5)
    with pytest.raises(ValueError):
        map_at_k(run, {"q1": set()}, 5)


def _brute_recall(run, qrels, k):
    vals = []
    for qid, rel in qrels.items():
        top = [doc for doc, _ in run.get(qid, [])][:k]
        vals.append(sum(1 for d in top if d in rel) / len(rel))
    return sum(vals) / len(vals)


def _brute_map(run, qrels, k):
    vals = []
    for qid, rel in qrels.items():
        top = [doc for doc, _ in run.get(qid, [])][:k]
        ap = 0.0
        seen = 0
        for rank, doc in enumerate(top, start=1):
            if doc in rel:
                seen += 1
                ap += seen / rank
        vals.append(ap / len(rel))
    return sum(vals) / len(vals)


def test_metrics_match_brute_force_randomized():
    rng = random.Random(99)
    docs = [f"d{i}" for i in range(30)]
    for trial in range(1000):
        qids = [f"q{i}" for i in range(rng.randint(1, 6))]
        qrels = {q: set(rng.sample(docs, rng.randint(1, 8))) for q in qids}
        run = {}
        for q in qids:
            if rng.random() < 0.15:
                continue  # leave some queries unanswered
            ranked = rng.sample(docs, rng.randint(0, 20))
            run[q] = [(d, float(30 - i)) for i, d in enumerate(ranked)]
        k = rng.choice([1, 3, 5, 10, 25])
        assert recall_at_k(run, qrels, k) == pytest.approx(
            _brute_recall(run, qrels, k), abs=1e-12
        ), f"trial {trial}"
        assert map_at_k(run, qrels, k) == pytest.approx(
            _brute_map(run, qrels, k), abs=1e-12
        ), f"trial {trial}"


# ---------------------------------------------------------------------------
# popularity bins
# ---------------------------------------------------------------------------


def test_assign_bins_worked_example():
    # total 12; ascending order d,e,f,c (freq 1) then b (2) then a (6).
    # running 1,2,3,4 -> *3 <= 12 holds through 4 -> four tail queries;
    # running 6 -> torso; running 12 -> head.
    freqs = {"a": 6, "b": 2, "c": 1, "d": 1, "e": 1, "f": 1}
    got = assign_bins(freqs).bins
    assert got == {
        "c": PopularityBin.TAIL,
        "d": PopularityBin.TAIL,
        "e": PopularityBin.TAIL,
        "f": PopularityBin.TAIL,
        "b": PopularityBin.TORSO,
        "a": PopularityBin.HEAD,
    }


def test_assign_bins_all_equal():
    got = assign_bins({"a": 5, "b": 5, "c": 5}).bins
    assert got == {
        "a": PopularityBin.TAIL,
        "b": PopularityBin.TORSO,
        "c": PopularityBin.HEAD,
    }


def test_assign_bins_dominant_head():
    got = assign_bins({"big": 1000, "s1": 1, "s2": 1}).bins
    assert got["big"] is PopularityBin.HEAD
    assert got["s1"] is PopularityBin.TAIL and got["s2"] is PopularityBin.TAIL


def test_assign_bins_validation():
    with pytest.raises(ValueError):
        assign_bins({})
    with pytest.raises(ValueError):
        assign_bins({"a": -1})
    with pytest.raises(ValueError):
        assign_bins({"a": 0, "b": 0})


def test_assign_bins_mass_balance_property():
    # each bin's mass can overshoot a third by at most one query's frequency
    rng = random.Random(7)
    for trial in range(300):
        n = rng.randint(1, 40)
        freqs = {f"q{i}": rng.randint(0, 50) for i in range(n)}
        if sum(freqs.values()) == 0:
            freqs["q0"] = 1
        assignment = assign_bins(freqs)
        total = sum(freqs.values())
        biggest = max(freqs.values())
        mass = {b: 0 for b in PopularityBin}
        for key, bin_ in assignment.bins.items():
            mass[bin_] += freqs[key]
        assert sum(mass.values()) == total
        assert mass[PopularityBin.TAIL] <= total / 3 + 1e-9
        assert mass[PopularityBin.TAIL] + mass[PopularityBin.TORSO] <= 2 * total / 3 + 1e-9
        # head holds at least the final third minus rounding slack
        assert mass[PopularityBin.HEAD] >= total / 3 - biggest, f"trial {trial}"


# ---------------------------------------------------------------------------
# reciprocal-rank fusion
# ---------------------------------------------------------------------------


def test_rrf_two_run_example():
    run_a = _run({"q1": ["x", "y"]})
    run_b = _run({"q1": ["y", "x"]})
    fused = rrf_fuse([run_a, run_b], kappa=60)
    scores = dict(fused["q1"])
    assert scores["x"] == pytest.approx(1 / 61 + 1 / 62)
    assert scores["y"] == pytest.approx(1 / 61 + 1 / 62)
    # exact tie falls back to ascending doc id
    assert [doc for doc, _ in fused["q1"]] == ["x", "y"]


def test_rrf_doc_in_one_run_only():
    run_a = _run({"q1": ["x"]})
    run_b = _run({"q1": ["y"]})
    scores = dict(rrf_fuse([run_a, run_b])["q1"])
    assert scores["x"] == pytest.approx(1 / 61)
    assert scores["y"] == pytest.approx(1 / 61)


def test_rrf_self_fusion_doubles_scores():
    run = _run({"q1": ["a", "b", "c"]})
    single = rrf_fuse([run])
    double = rrf_fuse([run, run])
    for (doc_s, score_s), (doc_d, score_d) in zip(single["q1"], double["q1"]):
        assert doc_s == doc_d
        assert score_d == pytest.approx(2 * score_s)


def test_rrf_union_of_queries():
    fused = rrf_fuse([_run({"q1": ["a"]}), _run({"q2": ["b"]})])
    assert set(fused) == {"q1", "q2"}
    assert fused["q1"] == [("a", pytest.approx(1 / 61))]


def test_rrf_rank_dominance():
    # a doc ranked above another in every run must fuse above it
    rng = random.Random(11)
    docs = [f"d{i}" for i in range(12)]
    for _ in range(100):
        runs = []
        for _ in range(rng.randint(2, 4)):
            order = docs[:]
            rng.shuffle(order)
            runs.append(_run({"q": order}))
        fused = rrf_fuse(runs, kappa=rng.choice([1, 10, 60]))
        position = {doc: i for i, (doc, _) in enumerate(fused["q"])}
        for a in docs:
            for b in docs:
                if all(
                    [d for d, _ in r["q"]].index(a) < [d for d, _ in r["q"]].index(b)
                    for r in runs
                ):
                    assert position[a] < position[b]


def test_rrf_validation():
    with pytest.raises(ValueError):
        rrf_fuse([])
    with pytest.raises(ValueError):
        rrf_fuse([_run({"q": ["a"]})], kappa=0)
    assert DEFAULT_RRF_KAPPA == 60


# ---------------------------------------------------------------------------
# evaluate + report
# ---------------------------------------------------------------------------


def _three_bin_setup():
    # equal frequencies split one query per bin, ascending key order
    qrels = {"q1": {"a"}, "q2": {"b"}, "q3": {"c"}}
    bins = assign_bins({"q1": 1, "q2": 1, "q3": 1})
    return qrels, bins


def test_evaluate_perfect_and_empty_runs():
    qrels, bins = _three_bin_setup()
    perfect = _run({"q1": ["a"], "q2": ["b"], "q3": ["c"]})
    empty: dict = {}
    report = evaluate([("good", perfect), ("none", empty)], qrels, bins)
    assert report.overall["good"]["recall@1000"] == pytest.approx(1.0)
    assert report.overall["good"]["map@100"] == pytest.approx(1.0)
    assert report.overall["none"]["recall@1000"] == pytest.approx(0.0)
    for bin_ in PopularityBin:
        assert report.by_bin["good"][bin_] == pytest.approx(1.0)
    assert report.bin_sizes == {
        PopularityBin.TAIL: 1,
        PopularityBin.TORSO: 1,
        PopularityBin.HEAD: 1,
    }


def test_evaluate_empty_bin_reports_nan():
    qrels = {"q1": {"a"}}
    bins = assign_bins({"q1": 4})
    report = evaluate([("r", _run({"q1": ["a"]}))], qrels, bins)
    assert math.isnan(report.by_bin["r"][PopularityBin.TAIL])
    assert report.by_bin["r"][PopularityBin.HEAD] == pytest.approx(1.0)


def test_evaluate_requires_bins_for_all_queries():
    qrels = {"q1": {"a"}, "q2": {"b"}}
    bins = assign_bins({"q1": 5})
    with pytest.raises(ValueError, match="no bin assignment"):
        evaluate([("r", {})], qrels, bins)


def test_report_machine_lines_and_render():
    qrels, bins = _three_bin_setup()
    run = _run({"q1": ["a"], "q2": ["x"], "q3": ["c"]})
    report = evaluate([("walks", run)], qrels, bins)
    lines = report.machine_lines()
    assert "walks.recall@1000=0.666667" in lines
    assert any(line.startswith("walks.recall@1000.head=") for line in lines)
    table = report.render()
    assert "walks" in table and "recall@100" in table
    assert len({len(line.rstrip()) for line in table.splitlines()[:2]}) == 1


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------


def test_run_round_trip(tmp_path):
    run = {
        "q1": [("a", 3.0), ("b", 2.5), ("c", 0.5)],
        "q2": [("z", 9.0)],
    }
    path = tmp_path / "run.txt"
    write_run(path, run, tag="walks")
    assert read_run(path) == run
    first = path.read_text().splitlines()[0].split()
    assert first == ["q1", "Q0", "a", "1", "3.0", "walks"]


def test_read_run_orders_by_rank_field(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 b 2 1.0 t\nq1 Q0 a 1 2.0 t\n")
    assert read_run(path) == {"q1": [("a", 2.0), ("b", 1.0)]}


def test_read_run_duplicate_doc_warns_keeps_first(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 a 1 2.0 t\nq1 Q0 a 2 1.0 t\n")
    with pytest.warns(UserWarning, match="duplicate doc"):
        assert read_run(path) == {"q1": [("a", 2.0)]}


def test_read_run_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 Q0 a 1 2.0 t\nq1 Q0 b oops 1.0 t\n")
    with pytest.raises(FileFormatError) as excinfo:
        read_run(path)
    assert excinfo.value.line_no == 2
    assert "run.txt:2:" in str(excinfo.value)


def test_read_run_wrong_field_count(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("q1 a 1\n")
    with pytest.raises(FileFormatError, match="expected 6 fields"):
        read_run(path)


def test_qrels_round_trip(tmp_path):
    qrels = {"q1": {"a", "b"}, "q2": {"c"}}
    path = tmp_path / "qrels.txt"
    write_qrels(path, qrels)
    assert read_qrels(path) == qrels
    assert path.read_text().splitlines()[0] == "q1 0 a 1"


def test_read_qrels_skips_zero_label(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 a 1\nq1 0 b 0\n")
    assert read_qrels(path) == {"q1": {"a"}}


def test_frequencies_round_trip(tmp_path):
    freqs = {"q1": 10, "q2": 3}
    path = tmp_path / "freq.txt"
    write_frequencies(path, freqs)
    assert read_frequencies(path) == freqs
    path.write_text("q1 ten\n")
    with pytest.raises(FileFormatError, match="count must be an integer"):
        read_frequencies(path)


def test_blank_lines_ignored(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("\nq1 Q0 a 1 2.0 t\n\n")
    assert read_run(path) == {"q1": [("a", 2.0)]}
