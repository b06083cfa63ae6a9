import io
import random

import pytest

from kcpm.kg import KnowledgeGraph, Triple
from kcpm.rules import (Atom, ClosedPathRule, Closure, RuleBase, chain_body,
                        entails, mine_rules, pca_confidence, read_rules_jsonl,
                        rule_stats, std_confidence, support, write_rules_jsonl)

from oracles import naive_mine

WORK_KG = KnowledgeGraph([
    Triple("al", "worksAt", "uow"),
    Triple("uow", "locatedIn", "wgg"),
    Triple("al", "livesIn", "wgg"),
    Triple("bo", "worksAt", "unr"),
    Triple("unr", "locatedIn", "rno"),
])

WORK_RULE = ClosedPathRule(
    chain_body(("worksAt", "locatedIn")), Atom("livesIn", "x", "y"),
    support=1, std_confidence=0.5, pca_confidence=1.0)


def test_rule_validates_chain_shape():
    with pytest.raises(ValueError):
        ClosedPathRule((Atom("p", "x", "z1"), Atom("q", "z2", "y")),
                       Atom("r", "x", "y"), 0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ClosedPathRule(chain_body(("p",)), Atom("r", "y", "x"), 0, 0.0, 0.0)
    with pytest.raises(ValueError):  # PCA below standard confidence
        ClosedPathRule(chain_body(("p",)), Atom("r", "x", "y"), 1, 0.9, 0.5)


def test_support_on_worked_example():
    assert support(WORK_RULE, WORK_KG) == 1


def test_support_empty_kg_and_absent_head():
    assert support(WORK_RULE, KnowledgeGraph()) == 0
    kg = KnowledgeGraph([Triple("a", "worksAt", "b"),
                         Triple("b", "locatedIn", "c")])
    assert support(WORK_RULE, kg) == 0  # head predicate absent


def test_confidences_on_worked_example():
    # body pairs: (al,wgg), (bo,rno); only al has a livesIn fact, so the
    # PCA denominator drops (bo,rno)
    assert std_confidence(WORK_RULE, WORK_KG) == 0.5
    assert pca_confidence(WORK_RULE, WORK_KG) == 1.0


def test_confidence_zero_support():
    kg = KnowledgeGraph([Triple("a", "worksAt", "b"),
                         Triple("b", "locatedIn", "c"),
                         Triple("z", "livesIn", "w")])
    assert support(WORK_RULE, kg) == 0
    assert pca_confidence(WORK_RULE, kg) == 0.0


def test_confidence_one_when_head_always_present():
    kg = KnowledgeGraph([
        Triple("a", "p", "b"), Triple("b", "q", "c"), Triple("a", "r", "c"),
        Triple("x", "p", "y"), Triple("y", "q", "z"), Triple("x", "r", "z"),
    ])
    sup, std, pca = rule_stats(("p", "q"), "r", kg)
    assert (sup, std, pca) == (2, 1.0, 1.0)


def test_mine_rules_finds_worked_example():
    rb = mine_rules(WORK_KG, max_body_len=2, min_support=1, min_pca_conf=0.5)
    match = [r for r in rb
             if r.body_predicates == ("worksAt", "locatedIn")
             and r.head.predicate == "livesIn"]
    assert len(match) == 1
    r = match[0]
    assert (r.support, r.std_confidence, r.pca_confidence) == (1, 0.5, 1.0)


def test_mine_rules_empty_when_support_unreachable():
    rb = mine_rules(WORK_KG, max_body_len=2, min_support=100)
    assert len(rb) == 0


def test_tautology_excluded():
    kg = KnowledgeGraph([Triple("a", "p", "b")])
    rb = mine_rules(kg, max_body_len=1, min_support=1)
    assert len(rb) == 0


def _random_kg(rng: random.Random, max_triples=50, n_predicates=6):
    entities = [f"e{i}" for i in range(rng.randint(4, 14))]
    predicates = [f"p{i}" for i in range(rng.randint(2, n_predicates))]
    triples = {
        Triple(rng.choice(entities), rng.choice(predicates),
               rng.choice(entities))
        for _ in range(rng.randint(1, max_triples))
    }
    return KnowledgeGraph(triples)


def test_mine_rules_matches_exhaustive_enumeration():
    rng = random.Random(42)
    for _ in range(25):
        kg = _random_kg(rng, max_triples=30, n_predicates=4)
        raw = [(t.subject, t.predicate, t.object) for t in kg.all_triples()]
        min_support = rng.randint(1, 3)
        min_pca = rng.choice([0.0, 0.3, 0.7])
        max_len = rng.randint(1, 3)
        mined = mine_rules(kg, max_len, min_support, min_pca)
        expected = naive_mine(raw, max_len, min_support, min_pca)
        got = {(r.body_predicates, r.head.predicate,
                r.support, r.std_confidence, r.pca_confidence) for r in mined}
        assert got == set(expected)


def test_mine_rules_monotone_in_thresholds():
    rng = random.Random(9)
    for _ in range(200):
        kg = _random_kg(rng, max_triples=20, n_predicates=3)
        base = {(r.body_predicates, r.head.predicate)
                for r in mine_rules(kg, 2, 1, 0.0)}
        tighter_support = {(r.body_predicates, r.head.predicate)
                           for r in mine_rules(kg, 2, 2, 0.0)}
        tighter_pca = {(r.body_predicates, r.head.predicate)
                       for r in mine_rules(kg, 2, 1, 0.6)}
        assert tighter_support <= base
        assert tighter_pca <= base


def test_pca_at_least_std_on_mined_rules():
    rng = random.Random(23)
    for _ in range(200):
        kg = _random_kg(rng, max_triples=25, n_predicates=4)
        for r in mine_rules(kg, 2, 1, 0.0):
            assert r.pca_confidence >= r.std_confidence - 1e-12


def test_mining_deterministic_serialization():
    rng = random.Random(31)
    for _ in range(20):
        kg = _random_kg(rng)
        rb1 = mine_rules(kg, 2, 1, 0.2)
        rb2 = mine_rules(KnowledgeGraph(set(kg.triples)), 2, 1, 0.2)
        buf1, buf2 = io.StringIO(), io.StringIO()
        write_rules_jsonl(rb1, buf1)
        write_rules_jsonl(rb2, buf2)
        assert buf1.getvalue() == buf2.getvalue()


def test_rules_jsonl_round_trip():
    rb = mine_rules(WORK_KG, 2, 1, 0.5)
    buf = io.StringIO()
    write_rules_jsonl(rb, buf)
    again = read_rules_jsonl(io.StringIO(buf.getvalue()))
    assert tuple(again.rules) == tuple(rb.rules)


def test_rule_text_format():
    assert WORK_RULE.text() == (
        "worksAt(x,z1) & locatedIn(z1,y) => livesIn(x,y) "
        "[supp=1 conf=0.50 pca=1.00]")


# ---------------------------------------------------------------------------
# Entailment
# ---------------------------------------------------------------------------

def test_entails_fact_in_kg():
    res = entails(RuleBase(()), WORK_KG, Triple("al", "livesIn", "wgg"))
    assert res.entailed and res.confidence == 1.0 and res.via_rule is None


def test_entails_one_step_derivation():
    kg = KnowledgeGraph([
        Triple("al", "worksAt", "uow"),
        Triple("uow", "locatedIn", "wgg"),
    ])
    rb = RuleBase((WORK_RULE,))
    res = entails(rb, kg, Triple("al", "livesIn", "wgg"))
    assert res.entailed
    assert res.confidence == 1.0
    assert res.via_rule == WORK_RULE.rule_id


def test_entails_unrelated_fact():
    res = entails(RuleBase((WORK_RULE,)), WORK_KG, Triple("q", "p", "r"))
    assert not res.entailed


def test_derived_confidence_is_product_max():
    # two chained derivations: p->q with 0.8, then q->r with 0.5
    r1 = ClosedPathRule(chain_body(("p",)), Atom("q", "x", "y"), 1, 0.8, 0.8)
    r2 = ClosedPathRule(chain_body(("q",)), Atom("r", "x", "y"), 1, 0.5, 0.5)
    kg = KnowledgeGraph([Triple("a", "p", "b")])
    closure = Closure(RuleBase((r1, r2), min_pca_conf=0.0), kg)
    res = closure.entails(Triple("a", "r", "b"))
    assert res.entailed
    assert res.confidence == pytest.approx(0.8 * 0.5)
    # a direct route with higher confidence wins the max
    r3 = ClosedPathRule(chain_body(("p",)), Atom("r", "x", "y"), 1, 0.9, 0.9)
    closure = Closure(RuleBase((r1, r2, r3), min_pca_conf=0.0), kg)
    assert closure.entails(Triple("a", "r", "b")).confidence == pytest.approx(0.9)


def test_entailment_monotone_in_kg():
    rng = random.Random(77)
    for _ in range(100):
        kg = _random_kg(rng, max_triples=15, n_predicates=3)
        rb = mine_rules(kg, 2, 1, 0.0)
        closure = Closure(rb, kg)
        derived = [t for t in closure.confidence]
        extra = Triple("fresh", "p0", "fresh2")
        bigger = KnowledgeGraph(set(kg.all_triples()) | {extra})
        closure2 = Closure(rb, bigger)
        for fact in derived:
            assert closure2.entails(fact).entailed


def test_recursive_rules_terminate():
    # transitive closure over a cycle must hit the derivation cap, not hang
    r = ClosedPathRule(chain_body(("p", "p")), Atom("p", "x", "y"), 1, 1.0, 1.0)
    kg = KnowledgeGraph([Triple("a", "p", "b"), Triple("b", "p", "c"),
                         Triple("c", "p", "a")])
    closure = Closure(RuleBase((r,), min_pca_conf=0.0), kg)
    assert closure.entails(Triple("a", "p", "c")).entailed
