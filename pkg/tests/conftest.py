import random
from datetime import datetime, timedelta, timezone

import pytest

from kcpm.eventlog import Event, EventLog, Trace

T0 = datetime(2024, 3, 1, 9, 0, 0, tzinfo=timezone.utc)


def log_from_sequences(sequences, start=T0, step_seconds=60):
    """Build an EventLog from activity-label lists; case ids c0, c1, ..."""
    traces = []
    for i, acts in enumerate(sequences):
        case = f"c{i}"
        base = start + timedelta(hours=i)
        events = tuple(
            Event(case, a, base + timedelta(seconds=j * step_seconds))
            for j, a in enumerate(acts)
        )
        traces.append(Trace(case, events))
    return EventLog(tuple(traces))


def random_sequences(rng: random.Random, n_traces, max_len, alphabet):
    return [
        [rng.choice(alphabet) for _ in range(rng.randint(1, max_len))]
        for _ in range(n_traces)
    ]


@pytest.fixture
def tiny_log():
    return log_from_sequences([["a", "b", "c"], ["a", "c"], ["a", "b", "b", "c"]])
