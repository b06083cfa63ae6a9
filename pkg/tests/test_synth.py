import io
import math
import random

import pytest

from kcpm.errors import DataError
from kcpm.synth import (CorruptionSpec, GroundTruthModel, corrupt,
                        dropped_events, model_from_json, model_to_json,
                        simulate, write_model, read_model)


def linear_model():
    return GroundTruthModel(
        frozenset({"a", "b", "c"}),
        {"a": 1.0},
        {"a": {"b": 1.0}, "b": {"c": 1.0}},
    )


def branch_model(p=0.5):
    return GroundTruthModel(
        frozenset({"s", "l", "r", "e"}),
        {"s": 1.0},
        {"s": {"l": p, "r": 1.0 - p},
         "l": {"e": 1.0}, "r": {"e": 1.0}},
    )


def test_probabilities_must_sum_to_one():
    with pytest.raises(ValueError):
        GroundTruthModel(frozenset({"a", "b"}), {"a": 0.9},
                         {"a": {"b": 1.0}})
    with pytest.raises(ValueError):
        GroundTruthModel(frozenset({"a", "b"}), {"a": 1.0},
                         {"a": {"b": 0.5}})


def test_linear_model_always_same_trace():
    log = simulate(linear_model(), 20, seed=5)
    assert all(t.activities == ("a", "b", "c") for t in log.traces)
    for t in log.traces:
        stamps = [e.timestamp for e in t.events]
        assert all(x < y for x, y in zip(stamps, stamps[1:]))


def test_degenerate_branch_takes_only_that_branch():
    log = simulate(branch_model(p=1.0), 50, seed=1)
    assert {t.activities for t in log.traces} == {("s", "l", "e")}


def test_branch_frequency_within_binomial_bound():
    log = simulate(branch_model(p=0.5), 10000, seed=9)
    lefts = sum(1 for t in log.traces if "l" in t.activities)
    assert abs(lefts / 10000 - 0.5) <= 0.02


def test_simulate_deterministic_per_seed():
    a = simulate(branch_model(), 100, seed=3)
    b = simulate(branch_model(), 100, seed=3)
    c = simulate(branch_model(), 100, seed=4)
    assert a == b
    assert a != c


def test_unreachable_end_is_error():
    looping = GroundTruthModel(
        frozenset({"a", "b"}), {"a": 1.0},
        {"a": {"b": 1.0}, "b": {"a": 1.0}})
    with pytest.raises(DataError):
        simulate(looping, 1, seed=0)


def test_length_cap_flags_truncation():
    # reachable end but overwhelmingly looping: hits the 200-step cap
    sticky = GroundTruthModel(
        frozenset({"a", "b"}), {"a": 1.0},
        {"a": {"a": 0.999, "b": 0.001}})
    log = simulate(sticky, 30, seed=2)
    assert log.meta.get("truncated_cases", 0) >= 1
    capped = [t for t in log.traces if len(t) == 200]
    assert capped
    assert capped[0].events[-1].attributes.get("truncated") is True


def test_corrupt_zero_rates_is_identity():
    log = simulate(branch_model(), 40, seed=7)
    assert corrupt(log, CorruptionSpec(0.0, 0.0, frozenset(), seed=1)) == log


def test_corrupt_drop_everything():
    log = simulate(linear_model(), 10, seed=0)
    assert len(corrupt(log, CorruptionSpec(1.0, 0.0, frozenset(), 0)).traces) == 0


def test_drop_counts_within_binomial_bound():
    model = GroundTruthModel(
        frozenset({f"x{i}" for i in range(15)} | {"end"}),
        {"x0": 1.0},
        {f"x{i}": {f"x{i+1}": 1.0} for i in range(14)} | {"x14": {"end": 1.0}},
    )
    log = simulate(model, 1000, seed=11)  # 16000 events
    n = log.n_events
    corrupted = corrupt(log, CorruptionSpec(0.1, 0.0, frozenset(), seed=13))
    dropped = n - corrupted.n_events
    sigma = math.sqrt(n * 0.1 * 0.9)
    assert abs(dropped - 0.1 * n) <= 3 * sigma


def test_corrupt_deterministic_and_marks_noise():
    log = simulate(branch_model(), 50, seed=21)
    spec = CorruptionSpec(0.1, 0.3, frozenset({"n1", "n2"}), seed=23)
    a, b = corrupt(log, spec), corrupt(log, spec)
    assert a == b
    noise = [e for t in a.traces for e in t.events
             if e.attributes.get("injected")]
    assert noise
    assert all(e.activity in {"n1", "n2"} for e in noise)


def test_survivors_come_from_source_unless_injected():
    rng = random.Random(31)
    for _ in range(200):
        log = simulate(branch_model(), rng.randint(1, 10), seed=rng.randint(0, 99))
        spec = CorruptionSpec(rng.random() * 0.5, rng.random() * 0.5,
                              frozenset({"zz"}), seed=rng.randint(0, 99))
        source_events = {(t.case_id, e.timestamp, e.activity)
                         for t in log.traces for e in t.events}
        for t in corrupt(log, spec).traces:
            for e in t.events:
                if e.attributes.get("injected"):
                    assert e.activity == "zz"
                else:
                    assert (t.case_id, e.timestamp, e.activity) in source_events


def test_dropped_events_diff():
    log = simulate(linear_model(), 200, seed=41)
    spec = CorruptionSpec(0.25, 0.2, frozenset({"zz"}), seed=43)
    corrupted = corrupt(log, spec)
    drops = dropped_events(log, corrupted)
    n_dropped = log.n_events - sum(
        1 for t in corrupted.traces for e in t.events
        if not e.attributes.get("injected"))
    assert sum(n for c in drops.values() for n in c.values()) == n_dropped
    assert all(set(c) <= {"a", "b", "c"} for c in drops.values())


def test_model_json_round_trip():
    model = branch_model(0.25)
    again = model_from_json(model_to_json(model))
    assert again == model
    buf = io.StringIO()
    write_model(model, buf)
    assert read_model(io.StringIO(buf.getvalue())) == model


def test_to_dependency_graph_reference():
    dg = branch_model().to_dependency_graph()
    assert set(dg.edges) == {("s", "l"), ("s", "r"), ("l", "e"), ("r", "e")}
    assert dg.start_activities == {"s": 1}
    assert dg.end_activities == {"e": 1}
