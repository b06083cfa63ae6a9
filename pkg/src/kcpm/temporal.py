"""Translational temporal embeddings for directly-follows prediction.

Each activity gets a vector; the directly-follows relation and each
coarse time bucket get one more. A successor pair (a, b) observed at
time t should satisfy  e(a) + r + tau(bucket(t)) ~ e(b); the
directly-follows degree is sigmoid(-distance), so identical sides give
0.5 and the score decays toward 0 with distance.

Training minimizes a margin ranking loss against tail-corrupted
negatives. Negatives are sampled once (uniformly, per seed) and the
optimizer is full-batch gradient descent with backtracking halving, so
the recorded per-epoch loss is nonincreasing by construction and runs
are bit-reproducible for a fixed seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import DataError
from .eventlog import EventLog
from .kg import DIRECTLY_FOLLOWS, KnowledgeGraph

CHECKPOINT_FORMAT = "kcpm-temporal-scorer"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ScorerParams:
    dim: int = 16
    margin: float = 1.0
    learning_rate: float = 0.5
    epochs: int = 80
    negatives: int = 4
    time_buckets: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 1 <= self.time_buckets <= 1440:
            raise ValueError("time_buckets must be in 1..1440")


def time_bucket(t: datetime, n_buckets: int = 24) -> int:
    """Hour-of-day bucketing, scaled to n_buckets slots."""
    return ((t.hour * 60 + t.minute) * n_buckets) // 1440


@dataclass
class TemporalScorer:
    activities: tuple[str, ...]
    entity_vecs: np.ndarray   # (n_activities, dim)
    relation_vec: np.ndarray  # (dim,)
    time_vecs: np.ndarray     # (time_buckets, dim)
    params: ScorerParams
    loss_history: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self._index = {a: i for i, a in enumerate(self.activities)}
        if not np.all(np.isfinite(self.entity_vecs)):
            raise ValueError("entity embeddings contain non-finite values")

    def index(self, activity: str) -> int:
        try:
            return self._index[activity]
        except KeyError:
            raise DataError(f"unknown activity {activity!r}") from None

    def knows(self, activity: str) -> bool:
        return activity in self._index


def df_training_triples(
    log: EventLog, kg: KnowledgeGraph, n_buckets: int
) -> list[tuple[str, str, int]]:
    """(predecessor, successor, bucket) samples from consecutive trace
    events (bucketed at the predecessor's timestamp) plus any temporal
    directly-follows facts in the knowledge graph."""
    out = []
    for t in log.traces:
        for prev, nxt in zip(t.events, t.events[1:]):
            out.append((prev.activity, nxt.activity,
                        time_bucket(prev.timestamp, n_buckets)))
    for tt in sorted(kg.temporal,
                     key=lambda x: (x.triple.subject, x.triple.object,
                                    x.timestamp)):
        if tt.triple.predicate == DIRECTLY_FOLLOWS:
            out.append((tt.triple.subject, tt.triple.object,
                        time_bucket(tt.timestamp, n_buckets)))
    return out


def _distances(E, r, T, heads, tails, buckets):
    u = E[heads] + r + T[buckets] - E[tails]
    return u, np.linalg.norm(u, axis=1)


def _scatter_rows(target, idx, rows):
    # bincount per dimension: equivalent to np.add.at but much faster,
    # and deterministic (bincount sums in index order)
    n = target.shape[0]
    for d in range(rows.shape[1]):
        target[:, d] += np.bincount(idx, weights=rows[:, d], minlength=n)


def _hinge_loss(E, r, T, heads, tails, buckets, neg_tails, margin) -> float:
    """Mean margin violation over every (positive, corrupted-tail) pair;
    neg_tails has one row of corrupted tails per positive."""
    k = neg_tails.shape[1]
    _, d_pos = _distances(E, r, T, heads, tails, buckets)
    _, d_neg = _distances(E, r, T, np.repeat(heads, k),
                          neg_tails.reshape(-1), np.repeat(buckets, k))
    viol = margin + np.repeat(d_pos, k) - d_neg
    return float(np.mean(np.maximum(0.0, viol)))


def _hinge_grads(E, r, T, heads, tails, buckets, neg_tails, margin):
    k = neg_tails.shape[1]
    nh = np.repeat(heads, k)
    nb = np.repeat(buckets, k)
    nt = neg_tails.reshape(-1)
    u_pos, d_pos = _distances(E, r, T, heads, tails, buckets)
    u_neg, d_neg = _distances(E, r, T, nh, nt, nb)
    active = (margin + np.repeat(d_pos, k) - d_neg) > 0
    scale = 1.0 / len(nt)
    # each positive contributes once per active pairing with its negatives
    n_active = active.reshape(-1, k).sum(axis=1)
    unit_pos = np.where((d_pos > 0)[:, None],
                        u_pos / np.maximum(d_pos, 1e-12)[:, None], 0.0)
    gp = scale * n_active[:, None] * unit_pos
    gn = np.where((active & (d_neg > 0))[:, None],
                  -scale * u_neg / np.maximum(d_neg, 1e-12)[:, None], 0.0)
    gE = np.zeros_like(E)
    _scatter_rows(gE, heads, gp)
    _scatter_rows(gE, nh, gn)
    _scatter_rows(gE, tails, -gp)
    _scatter_rows(gE, nt, -gn)
    gT = np.zeros_like(T)
    _scatter_rows(gT, buckets, gp)
    _scatter_rows(gT, nb, gn)
    gr = gp.sum(axis=0) + gn.sum(axis=0)
    return gE, gr, gT


def train_temporal_scorer(
    log: EventLog,
    kg: KnowledgeGraph | None = None,
    params: ScorerParams = ScorerParams(),
) -> TemporalScorer:
    if kg is None:
        kg = KnowledgeGraph()
    if not log.traces:
        raise DataError("cannot train on an empty log")
    triples = df_training_triples(log, kg, params.time_buckets)
    if not triples:
        raise DataError("log has no directly-follows pairs to train on")
    vocab = sorted({a for a, _, _ in triples} | {b for _, b, _ in triples})
    if len(vocab) < 2:
        raise DataError("need at least two distinct activities to form negatives")

    index = {a: i for i, a in enumerate(vocab)}
    n, dim = len(vocab), params.dim
    rng = np.random.default_rng(params.seed)
    bound = 6.0 / np.sqrt(dim)
    E = rng.uniform(-bound, bound, size=(n, dim))
    # relation/time offsets start small: the hinge only separates positive
    # from corrupted pairs, so large initial offsets would never shrink and
    # would pin every directly-follows degree near zero
    r = rng.uniform(-bound, bound, size=dim) * 0.1
    T = rng.uniform(-bound, bound, size=(params.time_buckets, dim)) * 0.05
    E /= np.maximum(1.0, np.linalg.norm(E, axis=1, keepdims=True))

    heads = np.array([index[a] for a, _, _ in triples])
    tails = np.array([index[b] for _, b, _ in triples])
    buckets = np.array([c for _, _, c in triples])

    # negatives drawn once: uniform over the vocabulary minus the true tail
    k = params.negatives
    raw = rng.integers(0, n - 1, size=(len(triples), k))
    neg_tails = raw + (raw >= tails[:, None])

    lr = params.learning_rate
    prev = _hinge_loss(E, r, T, heads, tails, buckets, neg_tails, params.margin)
    history = []
    for _ in range(params.epochs):
        gE, gr, gT = _hinge_grads(E, r, T, heads, tails, buckets, neg_tails,
                                  params.margin)
        accepted = prev
        for _attempt in range(20):
            cand_E = E - lr * gE
            cand_E /= np.maximum(1.0, np.linalg.norm(cand_E, axis=1, keepdims=True))
            cand_r = r - lr * gr
            cand_T = T - lr * gT
            cand_loss = _hinge_loss(cand_E, cand_r, cand_T, heads, tails,
                                    buckets, neg_tails, params.margin)
            if cand_loss <= prev:
                E, r, T = cand_E, cand_r, cand_T
                accepted = cand_loss
                lr = min(lr * 1.1, params.learning_rate)
                break
            lr *= 0.5
        history.append(accepted)
        prev = accepted
    return TemporalScorer(tuple(vocab), E, r, T, params, tuple(history))


def directly_follows_degree(
    scorer: TemporalScorer, a: str, b: str, t: datetime
) -> float:
    """sigmoid(-distance) in (0, 0.5]: the closer e(a)+r+tau lands to
    e(b), the likelier b directly follows a around that time of day."""
    i, j = scorer.index(a), scorer.index(b)
    bucket = time_bucket(t, scorer.params.time_buckets)
    u = (scorer.entity_vecs[i] + scorer.relation_vec
         + scorer.time_vecs[bucket] - scorer.entity_vecs[j])
    d = float(np.linalg.norm(u))
    return float(1.0 / (1.0 + np.exp(d)))


def successor_scores(scorer: TemporalScorer, a: str, t: datetime) -> dict[str, float]:
    """Directly-follows degree of every known activity as successor of a."""
    i = scorer.index(a)
    bucket = time_bucket(t, scorer.params.time_buckets)
    u = (scorer.entity_vecs[i] + scorer.relation_vec
         + scorer.time_vecs[bucket] - scorer.entity_vecs)
    d = np.linalg.norm(u, axis=1)
    score = 1.0 / (1.0 + np.exp(d))
    return {act: float(s) for act, s in zip(scorer.activities, score)}


def save_scorer(scorer: TemporalScorer, stream) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "activities": list(scorer.activities),
        "entity_vecs": scorer.entity_vecs.tolist(),
        "relation_vec": scorer.relation_vec.tolist(),
        "time_vecs": scorer.time_vecs.tolist(),
        "params": {
            "dim": scorer.params.dim,
            "margin": scorer.params.margin,
            "learning_rate": scorer.params.learning_rate,
            "epochs": scorer.params.epochs,
            "negatives": scorer.params.negatives,
            "time_buckets": scorer.params.time_buckets,
            "seed": scorer.params.seed,
        },
        "loss_history": list(scorer.loss_history),
    }
    json.dump(payload, stream, sort_keys=True)
    stream.write("\n")


def load_scorer(source) -> TemporalScorer:
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            payload = json.load(fh)
    else:
        payload = json.load(source)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"not a temporal scorer checkpoint: {payload.get('format')!r}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')!r}")
    return TemporalScorer(
        tuple(payload["activities"]),
        np.array(payload["entity_vecs"]),
        np.array(payload["relation_vec"]),
        np.array(payload["time_vecs"]),
        ScorerParams(**payload["params"]),
        tuple(payload["loss_history"]),
    )
