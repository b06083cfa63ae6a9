"""Event log data model and log-level statistics.

An event log is a sequence of traces (cases); each trace is the
time-ordered sequence of events of one case. Events carry an activity
label, a timestamp, an optional resource and a free-form attribute map
restricted to scalar values (str, int, float, bool, datetime).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime

Scalar = str | int | float | bool | datetime


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime
    resource: str | None = None
    attributes: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        if not self.activity.strip():
            raise ValueError("event activity must be nonempty")
        object.__setattr__(self, "activity", self.activity.strip())


@dataclass(frozen=True)
class Trace:
    """One case. Events are stably sorted by timestamp at construction,
    so ties keep their original (file) order."""

    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"trace {self.case_id!r} has no events")
        for e in self.events:
            if e.case_id != self.case_id:
                raise ValueError(
                    f"trace {self.case_id!r} contains event of case {e.case_id!r}"
                )
        ordered = tuple(sorted(self.events, key=lambda e: e.timestamp))
        object.__setattr__(self, "events", ordered)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    meta: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for t in self.traces:
            if t.case_id in seen:
                raise ValueError(f"duplicate case id {t.case_id!r}")
            seen.add(t.case_id)

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(e.activity for t in self.traces for e in t.events)

    @property
    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def trace(self, case_id: str) -> Trace:
        for t in self.traces:
            if t.case_id == case_id:
                return t
        raise KeyError(case_id)


@dataclass(frozen=True)
class ContextTable:
    """Per-case context attributes (demographics, history, ...)."""

    rows: dict[str, dict[str, Scalar]]

    def __post_init__(self):
        for case_id in self.rows:
            if not case_id:
                raise ValueError("context row with empty case id")


def make_log(
    events: list[Event], meta: dict[str, Scalar] | None = None
) -> EventLog:
    """Group a flat event list into traces, keyed by case id in order of
    first appearance. Each trace is internally time-sorted (stable)."""
    by_case: dict[str, list[Event]] = {}
    for e in events:
        by_case.setdefault(e.case_id, []).append(e)
    traces = tuple(Trace(cid, tuple(evs)) for cid, evs in by_case.items())
    return EventLog(traces, dict(meta or {}))


def directly_follows_counts(
    log: EventLog, threads: int = 1
) -> dict[tuple[str, str], int]:
    """Count (a, b) pairs where b immediately follows a within a trace."""

    def count_trace(t: Trace) -> Counter:
        acts = t.activities
        return Counter(zip(acts, acts[1:]))

    counts: Counter = Counter()
    for part in _map_traces(count_trace, log.traces, threads):
        counts.update(part)
    return dict(counts)


def eventually_follows_counts(
    log: EventLog, threads: int = 1
) -> dict[tuple[str, str], int]:
    """Count ordered position pairs i < j within a trace with activities (a, b).

    Uses a suffix-occurrence counter per trace, O(len * |alphabet|)."""

    def count_trace(t: Trace) -> Counter:
        acts = t.activities
        counts: Counter = Counter()
        suffix: Counter = Counter()
        for a in reversed(acts):
            for b, n in suffix.items():
                counts[(a, b)] += n
            suffix[a] += 1
        return counts

    counts = Counter()
    for part in _map_traces(count_trace, log.traces, threads):
        counts.update(part)
    return dict(counts)


def annotate_context(log: EventLog, ctx: ContextTable) -> tuple[EventLog, int]:
    """Merge per-case context attributes into every event of the matching
    trace. Pre-existing event attributes win on key collision.

    Returns the annotated log and the number of log cases that have no
    context row."""
    unmatched = 0
    traces = []
    for t in log.traces:
        row = ctx.rows.get(t.case_id)
        if row is None:
            unmatched += 1
            traces.append(t)
            continue
        events = tuple(
            Event(
                e.case_id,
                e.activity,
                e.timestamp,
                e.resource,
                {**row, **e.attributes},
            )
            for e in t.events
        )
        traces.append(Trace(t.case_id, events))
    return EventLog(tuple(traces), dict(log.meta)), unmatched


def start_activity_counts(log: EventLog) -> dict[str, int]:
    return dict(Counter(t.events[0].activity for t in log.traces))


def end_activity_counts(log: EventLog) -> dict[str, int]:
    return dict(Counter(t.events[-1].activity for t in log.traces))


def activity_counts(log: EventLog) -> dict[str, int]:
    return dict(Counter(e.activity for t in log.traces for e in t.events))


def log_statistics(log: EventLog) -> dict:
    """Summary statistics in JSON-exportable form."""
    lengths = [len(t) for t in log.traces]
    return {
        "n_traces": len(log.traces),
        "n_events": log.n_events,
        "n_activities": len(log.alphabet),
        "activities": sorted(log.alphabet),
        "activity_counts": dict(sorted(activity_counts(log).items())),
        "start_activities": dict(sorted(start_activity_counts(log).items())),
        "end_activities": dict(sorted(end_activity_counts(log).items())),
        "trace_length": {
            "min": min(lengths) if lengths else 0,
            "max": max(lengths) if lengths else 0,
            "mean": (sum(lengths) / len(lengths)) if lengths else 0.0,
        },
    }


def _map_traces(fn, traces, threads: int):
    if threads <= 1 or len(traces) < 2:
        return [fn(t) for t in traces]
    from concurrent.futures import ThreadPoolExecutor

    # executor.map preserves input order, so the commutative merge above
    # is bit-identical to the sequential scan
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, traces))
