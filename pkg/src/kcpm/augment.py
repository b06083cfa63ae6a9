"""Event log repair: remove rule-violating events, insert rule-implied
missing ones, and check guideline latencies.

Removal is contradiction-driven: an event goes when the rule base
entails that its activity is forbidden immediately before its successor
(or, with strict ordering enabled, when an entailed prerequisite never
occurred earlier in the trace). Insertion is obligation-driven: when an
entailed prerequisite of an event is absent from the prefix, a candidate
for it is placed directly before that event and accepted if either the
rule derivation or the embedding scorer clears the acceptance threshold.
Inserted events are marked ``synthetic=true``; the original trace is
always a subsequence of the repaired one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta

from .eventlog import Event, EventLog, Trace
from .kg import FORBIDDEN_BEFORE, MUST_PRECEDE, KnowledgeGraph
from .rules import Closure, RuleBase
from .temporal import TemporalScorer, directly_follows_degree


@dataclass(frozen=True)
class RemovedEvent:
    case_id: str
    index: int          # position in the trace as passed in
    activity: str
    rule_id: str | None


@dataclass(frozen=True)
class CandidateInsertion:
    case_id: str
    activity: str
    position: int       # insert before events[position] of the final trace
    score: float
    provenance: str     # "rule" | "embedding"
    rule_id: str | None = None

    def __post_init__(self):
        if self.position < 0:
            raise ValueError("position must be nonnegative")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")


@dataclass(frozen=True)
class AugmentationReport:
    removed_events: tuple[RemovedEvent, ...] = ()
    inserted: tuple[CandidateInsertion, ...] = ()
    thresholds: dict | None = None


def _entity(alias: dict[str, str] | None, activity: str) -> str | None:
    if alias is None:
        return activity
    return alias.get(activity)


def filter_chaotic_events(
    log: EventLog,
    rb: RuleBase,
    kg: KnowledgeGraph,
    alias: dict[str, str] | None = None,
    strict_ordering: bool = False,
) -> tuple[EventLog, AugmentationReport]:
    """Remove events whose position the rule base rules out.

    Per trace, the leftmost violating event is removed and the trace
    re-spliced, repeating until stable, which makes the operation
    idempotent. Events whose activity has no entity mapping are never
    touched. Reported indices refer to the input trace.
    """
    closure = Closure(rb, kg)
    forbidden: dict[str, dict[str, str | None]] = {}
    for t in closure.facts_with(FORBIDDEN_BEFORE):
        forbidden.setdefault(t.subject, {})[t.object] = closure.entails(t).via_rule
    prereqs: dict[str, dict[str, str | None]] = {}
    for t in closure.facts_with(MUST_PRECEDE):
        prereqs.setdefault(t.object, {})[t.subject] = closure.entails(t).via_rule

    def violation(events, i) -> tuple[str | None] | None:
        """1-tuple with the triggering rule id if events[i] must go."""
        ent = _entity(alias, events[i].activity)
        if ent is None:
            return None
        if i + 1 < len(events):
            nxt = _entity(alias, events[i + 1].activity)
            if nxt is not None and nxt in forbidden.get(ent, {}):
                return (forbidden[ent][nxt],)
        if strict_ordering:
            seen = {_entity(alias, e.activity) for e in events[:i]}
            for p in sorted(prereqs.get(ent, {})):
                if p not in seen:
                    return (prereqs[ent][p],)
        return None

    removed: list[RemovedEvent] = []
    traces = []
    for t in log.traces:
        work = list(t.events)
        positions = list(range(len(work)))
        while True:
            hit = None
            for i in range(len(work)):
                verdict = violation(work, i)
                if verdict is not None:
                    hit = (i, verdict[0])
                    break
            if hit is None:
                break
            i, rule_id = hit
            removed.append(RemovedEvent(t.case_id, positions[i],
                                        work[i].activity, rule_id))
            del work[i]
            del positions[i]
        if work:
            traces.append(Trace(t.case_id, tuple(work)))
    report = AugmentationReport(
        removed_events=tuple(removed),
        thresholds={"strict_ordering": strict_ordering},
    )
    return EventLog(tuple(traces), dict(log.meta)), report


def infer_missing_events(
    log: EventLog,
    rb: RuleBase,
    kg: KnowledgeGraph,
    scorer: TemporalScorer | None = None,
    theta: float = 0.5,
    alias: dict[str, str] | None = None,
) -> tuple[EventLog, AugmentationReport]:
    """Insert rule-implied prerequisite events that are missing from a
    trace prefix.

    Scanning left to right, each event whose entailed prerequisites are
    absent earlier in the (working) trace gets them inserted directly
    before it, ordered among themselves by their own precedence
    entailments. A candidate is accepted when the obligation's
    derivation confidence reaches theta, or failing that when the
    embedding scorer rates the (predecessor, candidate) successor degree
    at least theta. Inserted events take the midpoint of their
    neighbors' timestamps (one second before the first event at trace
    start) and the attribute synthetic=true.
    """
    closure = Closure(rb, kg)
    prereq_facts: dict[str, dict[str, tuple[float, str | None]]] = {}
    for t in closure.facts_with(MUST_PRECEDE):
        res = closure.entails(t)
        prereq_facts.setdefault(t.object, {})[t.subject] = (res.confidence,
                                                            res.via_rule)
    reverse_alias: dict[str, str] = {}
    if alias:
        for act, ent in alias.items():
            reverse_alias.setdefault(ent, act)

    def activity_of(entity: str) -> str:
        if alias is None:
            return entity
        return reverse_alias.get(entity, entity)

    inserted: list[CandidateInsertion] = []
    traces = []
    for t in log.traces:
        work = list(t.events)
        inserted_here: set[str] = set()  # one insertion per entity per trace
        i = 0
        while i < len(work):
            ent = _entity(alias, work[i].activity)
            if ent is None or ent not in prereq_facts:
                i += 1
                continue
            seen = {_entity(alias, e.activity) for e in work[:i]}
            missing = {p: stats for p, stats in prereq_facts[ent].items()
                       if p not in seen and p not in inserted_here}
            insert_at = i
            for p in _order_by_precedence(missing, prereq_facts):
                conf, rule_id = missing[p]
                accepted = None
                if conf >= theta:
                    accepted = CandidateInsertion(
                        t.case_id, activity_of(p), insert_at, conf, "rule",
                        rule_id)
                elif scorer is not None and insert_at > 0:
                    pred = work[insert_at - 1]
                    if scorer.knows(pred.activity) and scorer.knows(activity_of(p)):
                        degree = directly_follows_degree(
                            scorer, pred.activity, activity_of(p), pred.timestamp)
                        if degree >= theta:
                            accepted = CandidateInsertion(
                                t.case_id, activity_of(p), insert_at, degree,
                                "embedding")
                if accepted is None:
                    continue
                work.insert(insert_at, Event(t.case_id, accepted.activity,
                                             _midpoint(work, insert_at),
                                             attributes={"synthetic": True}))
                inserted.append(accepted)
                inserted_here.add(p)
                insert_at += 1
            if insert_at == i:
                i += 1
            # otherwise stay at the first inserted event so its own
            # prerequisites are checked before the scan moves on
        traces.append(Trace(t.case_id, tuple(work)))
    report = AugmentationReport(inserted=tuple(inserted),
                                thresholds={"theta": theta})
    return EventLog(tuple(traces), dict(log.meta)), report


def _order_by_precedence(missing: dict, prereq_facts: dict) -> list[str]:
    """Topological order of the missing prerequisites by their own
    must-precede entailments, alphabetical among unordered ones."""
    pending = sorted(missing)
    ordered: list[str] = []
    while pending:
        for p in pending:
            before = prereq_facts.get(p, {})
            if not any(q in pending and q != p for q in before):
                ordered.append(p)
                pending.remove(p)
                break
        else:  # cycle: fall back to alphabetical for the rest
            ordered.extend(pending)
            break
    return ordered


def _midpoint(events, pos: int) -> datetime:
    if pos == 0:
        return events[0].timestamp - timedelta(seconds=1)
    before = events[pos - 1].timestamp
    if pos >= len(events):
        return before + timedelta(seconds=1)
    return before + (events[pos].timestamp - before) / 2


def check_guideline_latency(
    log: EventLog, from_activity: str, to_activity: str, limit: timedelta
) -> float:
    """Fraction of cases containing both activities whose elapsed time
    from the first occurrence of one to the first occurrence of the
    other exceeds the limit."""
    n_both = 0
    n_violating = 0
    for t in log.traces:
        first_from = next((e.timestamp for e in t.events
                           if e.activity == from_activity), None)
        first_to = next((e.timestamp for e in t.events
                         if e.activity == to_activity), None)
        if first_from is None or first_to is None:
            continue
        n_both += 1
        if first_to - first_from > limit:
            n_violating += 1
    return n_violating / n_both if n_both else 0.0


def report_to_json(report: AugmentationReport) -> dict:
    return {
        "removed_events": [
            {"case_id": r.case_id, "index": r.index, "activity": r.activity,
             "rule_id": r.rule_id}
            for r in report.removed_events
        ],
        "inserted": [
            {"case_id": c.case_id, "activity": c.activity,
             "position": c.position, "score": c.score,
             "provenance": c.provenance, "rule_id": c.rule_id}
            for c in report.inserted
        ],
        "thresholds": report.thresholds or {},
    }


def merge_reports(a: AugmentationReport, b: AugmentationReport) -> AugmentationReport:
    return AugmentationReport(
        a.removed_events + b.removed_events,
        a.inserted + b.inserted,
        {**(a.thresholds or {}), **(b.thresholds or {})},
    )


def dump_report(report: AugmentationReport, stream) -> None:
    json.dump(report_to_json(report), stream, indent=2, sort_keys=True)
    stream.write("\n")
