"""Closed-path Horn rules: mining with support/confidence statistics and
forward-chaining entailment.

A rule has the shape

    P1(x,z1) & P2(z1,z2) & ... & Pn(z_{n-1},y)  =>  P(x,y)

Support counts the distinct (x, y) pairs for which some assignment of
the chain variables satisfies every body atom and the head fact is
present. Standard confidence divides by all body-satisfying pairs; PCA
confidence divides only by body pairs whose subject has at least one
known head-predicate fact, treating subjects with no recorded head fact
as unknown rather than false.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .kg import KnowledgeGraph, Triple

_EPS = 1e-12


@dataclass(frozen=True)
class Atom:
    predicate: str
    subject_var: str
    object_var: str

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("atom predicate must be nonempty")

    def __str__(self):
        return f"{self.predicate}({self.subject_var},{self.object_var})"


def chain_body(predicates: tuple[str, ...] | list[str]) -> tuple[Atom, ...]:
    """Body atoms chaining x through z1..z_{n-1} to y."""
    n = len(predicates)
    vars_ = ["x"] + [f"z{i}" for i in range(1, n)] + ["y"]
    return tuple(
        Atom(p, vars_[i], vars_[i + 1]) for i, p in enumerate(predicates)
    )


@dataclass(frozen=True)
class ClosedPathRule:
    body: tuple[Atom, ...]
    head: Atom
    support: int
    std_confidence: float
    pca_confidence: float

    def __post_init__(self):
        if self.head.subject_var != "x" or self.head.object_var != "y":
            raise ValueError("head must be P(x,y)")
        expect = chain_body(self.body_predicates)
        if tuple(self.body) != expect:
            raise ValueError("body is not a connected x..z_i..y chain")
        if self.pca_confidence < self.std_confidence - _EPS:
            raise ValueError("PCA confidence cannot be below standard confidence")

    @property
    def body_predicates(self) -> tuple[str, ...]:
        return tuple(a.predicate for a in self.body)

    def text(self) -> str:
        body = " & ".join(str(a) for a in self.body)
        return (f"{body} => {self.head} "
                f"[supp={self.support} conf={self.std_confidence:.2f} "
                f"pca={self.pca_confidence:.2f}]")

    @property
    def rule_id(self) -> str:
        body = ",".join(self.body_predicates)
        return f"{body}=>{self.head.predicate}"


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[ClosedPathRule, ...]
    min_support: int = 1
    min_pca_conf: float = 0.0
    max_body_len: int = 3

    def __post_init__(self):
        for r in self.rules:
            if (r.support < self.min_support
                    or r.pca_confidence < self.min_pca_conf - _EPS
                    or len(r.body) > self.max_body_len):
                raise ValueError(f"rule violates stored thresholds: {r.text()}")

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)


def body_pairs(predicates, kg: KnowledgeGraph) -> set[tuple[str, str]]:
    """Distinct (x, y) with some chain-variable assignment satisfying the
    body, computed by joining per-predicate successor maps left to right."""
    first = kg.by_predicate(predicates[0])
    pairs = {(t.subject, t.object) for t in first}
    for pred in predicates[1:]:
        succ: dict[str, set[str]] = {}
        for t in kg.by_predicate(pred):
            succ.setdefault(t.subject, set()).add(t.object)
        pairs = {(x, o) for x, mid in pairs for o in succ.get(mid, ())}
        if not pairs:
            break
    return pairs


def rule_stats(
    body_predicates, head_predicate: str, kg: KnowledgeGraph
) -> tuple[int, float, float]:
    """(support, standard confidence, PCA confidence) of a candidate rule."""
    pairs = body_pairs(body_predicates, kg)
    if not pairs:
        return 0, 0.0, 0.0
    head_facts = {(t.subject, t.object) for t in kg.by_predicate(head_predicate)}
    support = len(pairs & head_facts)
    std = support / len(pairs)
    head_subjects = {s for s, _ in head_facts}
    pca_den = sum(1 for x, _ in pairs if x in head_subjects)
    pca = support / pca_den if pca_den else 0.0
    return support, std, pca


def support(rule: ClosedPathRule, kg: KnowledgeGraph) -> int:
    return rule_stats(rule.body_predicates, rule.head.predicate, kg)[0]


def std_confidence(rule: ClosedPathRule, kg: KnowledgeGraph) -> float:
    return rule_stats(rule.body_predicates, rule.head.predicate, kg)[1]


def pca_confidence(rule: ClosedPathRule, kg: KnowledgeGraph) -> float:
    return rule_stats(rule.body_predicates, rule.head.predicate, kg)[2]


def mine_rules(
    kg: KnowledgeGraph,
    max_body_len: int = 2,
    min_support: int = 1,
    min_pca_conf: float = 0.0,
) -> RuleBase:
    """Enumerate every closed-path rule up to max_body_len body atoms and
    keep those meeting both thresholds.

    Tautologies (single-atom body with the head's own predicate) are
    excluded. Output order is deterministic: head predicate, body
    predicates, then descending PCA confidence.
    """
    if max_body_len not in (1, 2, 3):
        raise ValueError("max_body_len must be 1, 2 or 3")
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    preds = sorted(kg.predicates)
    kept: list[ClosedPathRule] = []
    for n in range(1, max_body_len + 1):
        for body_preds in itertools.product(preds, repeat=n):
            pairs = body_pairs(body_preds, kg)
            if len(pairs) < min_support:
                continue
            for head in preds:
                if n == 1 and head == body_preds[0]:
                    continue
                head_facts = {(t.subject, t.object)
                              for t in kg.by_predicate(head)}
                sup = len(pairs & head_facts)
                if sup < min_support:
                    continue
                std = sup / len(pairs)
                head_subjects = {s for s, _ in head_facts}
                pca_den = sum(1 for x, _ in pairs if x in head_subjects)
                pca = sup / pca_den if pca_den else 0.0
                if pca < min_pca_conf - _EPS:
                    continue
                kept.append(ClosedPathRule(
                    chain_body(body_preds), Atom(head, "x", "y"),
                    sup, std, pca,
                ))
    kept.sort(key=lambda r: (r.head.predicate, r.body_predicates,
                             -r.pca_confidence))
    return RuleBase(tuple(kept), min_support, min_pca_conf, max_body_len)


# ---------------------------------------------------------------------------
# Forward chaining
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntailmentResult:
    entailed: bool
    confidence: float = 0.0
    via_rule: str | None = None  # rule id of the best derivation's last step


class Closure:
    """Fixpoint of forward chaining a rule base over a knowledge graph.

    Base facts hold with confidence 1.0. A derived fact's confidence is
    the maximum over derivations of the product of the PCA confidences of
    all rules applied in the derivation tree. Derivation count is capped
    at |entities|^2 to guarantee termination with recursive rules.
    """

    def __init__(self, rb: RuleBase, kg: KnowledgeGraph):
        self.kg = kg
        self.confidence: dict[Triple, float] = {}
        self.via_rule: dict[Triple, str | None] = {}
        for t in kg.all_triples():
            self.confidence[t] = 1.0
            self.via_rule[t] = None
        cap = max(1, len(kg.entities)) ** 2
        derivations = 0
        changed = True
        while changed and derivations < cap:
            changed = False
            for rule in rb.rules:
                for (x, y), conf in self._body_pairs_conf(rule).items():
                    derived = conf * rule.pca_confidence
                    fact = Triple(x, rule.head.predicate, y)
                    if derived > self.confidence.get(fact, 0.0) + _EPS:
                        self.confidence[fact] = derived
                        self.via_rule[fact] = rule.rule_id
                        changed = True
                        derivations += 1
                        if derivations >= cap:
                            break
                if derivations >= cap:
                    break

    def _facts_by_predicate(self, predicate: str) -> dict[Triple, float]:
        return {t: c for t, c in self.confidence.items()
                if t.predicate == predicate}

    def _body_pairs_conf(self, rule: ClosedPathRule) -> dict[tuple[str, str], float]:
        """(x, y) -> best product of body-fact confidences."""
        frontier: dict[tuple[str, str], float] = {}
        for t, c in self._facts_by_predicate(rule.body[0].predicate).items():
            key = (t.subject, t.object)
            if c > frontier.get(key, 0.0):
                frontier[key] = c
        for atom in rule.body[1:]:
            succ: dict[str, list[tuple[str, float]]] = {}
            for t, c in self._facts_by_predicate(atom.predicate).items():
                succ.setdefault(t.subject, []).append((t.object, c))
            nxt: dict[tuple[str, str], float] = {}
            for (x, mid), c in frontier.items():
                for obj, c2 in succ.get(mid, ()):
                    combined = c * c2
                    key = (x, obj)
                    if combined > nxt.get(key, 0.0):
                        nxt[key] = combined
            frontier = nxt
            if not frontier:
                break
        return frontier

    def entails(self, fact: Triple) -> EntailmentResult:
        conf = self.confidence.get(fact)
        if conf is None:
            return EntailmentResult(False)
        return EntailmentResult(True, conf, self.via_rule[fact])

    def facts_with(self, predicate: str, *, object: str | None = None,
                   subject: str | None = None) -> list[Triple]:
        out = [t for t in self.confidence
               if t.predicate == predicate
               and (object is None or t.object == object)
               and (subject is None or t.subject == subject)]
        out.sort(key=lambda t: (t.subject, t.object))
        return out


def entails(rb: RuleBase, kg: KnowledgeGraph, fact: Triple) -> EntailmentResult:
    """One-shot entailment check; builds the closure each call. For bulk
    queries, build a Closure once and reuse it."""
    return Closure(rb, kg).entails(fact)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def rule_to_json(rule: ClosedPathRule) -> dict:
    return {
        "body": [
            {"predicate": a.predicate, "subject": a.subject_var,
             "object": a.object_var}
            for a in rule.body
        ],
        "head": {"predicate": rule.head.predicate, "subject": "x",
                 "object": "y"},
        "support": rule.support,
        "std_confidence": rule.std_confidence,
        "pca_confidence": rule.pca_confidence,
    }


def rule_from_json(obj: dict) -> ClosedPathRule:
    preds = tuple(a["predicate"] for a in obj["body"])
    return ClosedPathRule(
        chain_body(preds),
        Atom(obj["head"]["predicate"], "x", "y"),
        obj["support"],
        obj["std_confidence"],
        obj["pca_confidence"],
    )


def write_rules_jsonl(rb: RuleBase, stream) -> None:
    for rule in rb.rules:
        stream.write(json.dumps(rule_to_json(rule), sort_keys=True) + "\n")


def read_rules_jsonl(stream, min_support: int | None = None,
                     min_pca_conf: float | None = None) -> RuleBase:
    """Read a rule base; thresholds default to the loosest values the
    loaded rules still satisfy."""
    rules = tuple(
        rule_from_json(json.loads(line))
        for line in stream if line.strip()
    )
    if min_support is None:
        min_support = min((r.support for r in rules), default=1)
    if min_pca_conf is None:
        min_pca_conf = min((r.pca_confidence for r in rules), default=0.0)
    max_len = max((len(r.body) for r in rules), default=3)
    return RuleBase(rules, min_support, min_pca_conf, max_len)


def write_rules_text(rb: RuleBase, stream) -> None:
    for rule in rb.rules:
        stream.write(rule.text() + "\n")
