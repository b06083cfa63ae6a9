import io
import random

import pytest

from kcpm.conformance import (FootprintMatrix, Relation, comparison_table,
                              conformance, f_score, footprint_csv,
                              footprint_of_log, footprint_of_model,
                              footprint_table, report_to_json)
from kcpm.dfg import MiningThresholds, mine_dependency_graph
from kcpm.errors import DataError
from kcpm.eventlog import EventLog

from conftest import log_from_sequences, random_sequences
from oracles import naive_footprint


def test_footprint_simple_causality():
    fp = footprint_of_log(log_from_sequences([["a", "b"]]))
    assert fp.relation[("a", "b")] is Relation.CAUSAL
    assert fp.relation[("b", "a")] is Relation.REVERSE


def test_footprint_parallel():
    fp = footprint_of_log(log_from_sequences([["a", "b"], ["b", "a"]]))
    assert fp.relation[("a", "b")] is Relation.PARALLEL
    assert fp.relation[("b", "a")] is Relation.PARALLEL


def test_footprint_empty_log_is_error():
    with pytest.raises(DataError):
        footprint_of_log(EventLog(()))


def test_footprint_matches_bruteforce_and_symmetry():
    rng = random.Random(41)
    for _ in range(200):
        seqs = random_sequences(rng, rng.randint(1, 12), 10, list("abcde"))
        fp = footprint_of_log(log_from_sequences(seqs))
        naive = naive_footprint(seqs)
        assert {p: r.value for p, r in fp.relation.items()} == naive
        for a in fp.activities:
            for b in fp.activities:
                rel, mirror = fp.relation[(a, b)], fp.relation[(b, a)]
                if rel is Relation.CAUSAL:
                    assert mirror is Relation.REVERSE
                elif rel in (Relation.PARALLEL, Relation.UNRELATED):
                    assert mirror is rel


def test_model_footprint_cases():
    log = log_from_sequences([["a", "b"]] * 3)
    dg = mine_dependency_graph(log, MiningThresholds(0.5, 1))
    fp = footprint_of_model(dg)
    assert fp.relation[("a", "b")] is Relation.CAUSAL
    empty = mine_dependency_graph(log, MiningThresholds(0.99, 99))
    fp2 = footprint_of_model(empty)
    assert all(r is Relation.UNRELATED for r in fp2.relation.values())


def test_conformance_identity():
    fp = footprint_of_log(log_from_sequences([["a", "b", "c"], ["a", "c"]]))
    report = conformance(fp, fp)
    assert (report.fitness, report.precision, report.f_score) == (1.0, 1.0, 1.0)
    assert report.deviations == ()


def test_conformance_identity_on_random_footprints():
    rng = random.Random(43)
    for _ in range(200):
        seqs = random_sequences(rng, rng.randint(1, 6), 8, list("abcd"))
        fp = footprint_of_log(log_from_sequences(seqs))
        rep = conformance(fp, fp)
        assert (rep.fitness, rep.precision, rep.f_score) == (1.0, 1.0, 1.0)


def test_f_score_matches_published_rows():
    assert f_score(0.794, 0.573) == pytest.approx(0.665, abs=1e-3)
    assert f_score(0.903, 0.671) == pytest.approx(0.769, abs=1e-3)
    assert f_score(0.0, 0.9) == 0.0


def test_adding_log_edge_to_model_never_decreases_fitness():
    rng = random.Random(47)
    for _ in range(100):
        seqs = random_sequences(rng, rng.randint(1, 6), 8, list("abcd"))
        log = log_from_sequences(seqs)
        log_fp = footprint_of_log(log)
        dg = mine_dependency_graph(log, MiningThresholds(0.7, 2))
        model_fp = footprint_of_model(dg)
        before = conformance(log_fp, model_fp).fitness
        log_pairs = [p for p, r in log_fp.relation.items()
                     if r in (Relation.CAUSAL, Relation.PARALLEL)
                     and p not in dg.edges]
        if not log_pairs:
            continue
        extra = sorted(log_pairs)[0]
        pairs = set(dg.edges) | {extra}
        acts = tuple(sorted(dg.activities))
        rel = {}
        for a in acts:
            for b in acts:
                ab, ba = (a, b) in pairs, (b, a) in pairs
                rel[(a, b)] = (Relation.PARALLEL if ab and ba else
                               Relation.CAUSAL if ab else
                               Relation.REVERSE if ba else Relation.UNRELATED)
        after = conformance(log_fp, FootprintMatrix(acts, rel)).fitness
        assert after >= before


def test_deviations_list_differing_pairs():
    log_fp = footprint_of_log(log_from_sequences([["a", "b"]]))
    model_fp = footprint_of_log(log_from_sequences([["b", "a"]]))
    report = conformance(log_fp, model_fp)
    pairs = {d.pair for d in report.deviations}
    assert ("a", "b") in pairs and ("b", "a") in pairs


def test_union_alphabet_fills_unrelated():
    log_fp = footprint_of_log(log_from_sequences([["a", "b"]]))
    model_fp = footprint_of_log(log_from_sequences([["a", "c"]]))
    report = conformance(log_fp, model_fp)
    # (a,b) observed but not modeled; (a,c) modeled but not observed
    assert report.fitness == 0.0
    assert report.precision == 0.0


def test_matrix_rejects_asymmetry():
    with pytest.raises(ValueError):
        FootprintMatrix(("a", "b"), {
            ("a", "a"): Relation.UNRELATED, ("b", "b"): Relation.UNRELATED,
            ("a", "b"): Relation.CAUSAL, ("b", "a"): Relation.PARALLEL,
        })


def test_rendering():
    fp = footprint_of_log(log_from_sequences([["a", "b"]]))
    text = footprint_table(fp)
    assert "->" in text and "<-" in text
    buf = io.StringIO()
    footprint_csv(fp, buf)
    assert buf.getvalue().splitlines()[0] == ",a,b"
    rep = conformance(fp, fp)
    table = comparison_table([("raw", rep)])
    assert "Event Log Type" in table and "1.000" in table
    payload = report_to_json(rep)
    assert payload["f_score"] == 1.0
