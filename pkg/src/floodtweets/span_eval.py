"""Scoring for both tasks.

Relevance runs are scored with positive-class precision/recall/F1.  Location
runs are scored at span level, in exact or partial (>= 1 shared word) mode,
with counts micro-averaged over the corpus.  Undefined ratios are reported as
0 and flagged via :attr:`PRF.undefined`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus_io import BioTag, TokenAnnotatedTweet


class InvalidBIOError(ValueError):
    pass


class SpanError(ValueError):
    pass


class UnknownTweetError(ValueError):
    pass


class MatchMode(str, Enum):
    EXACT = "exact"
    PARTIAL = "partial"


class OmittedPolicy(str, Enum):
    COUNT_AS_FALSE = "count_as_false"
    IGNORE = "ignore"


DEFAULT_POLICY = {
    MatchMode.EXACT: OmittedPolicy.COUNT_AS_FALSE,
    MatchMode.PARTIAL: OmittedPolicy.IGNORE,
}


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int
    tweet_id: str = field(default="", compare=False)

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise SpanError(f"invalid span ({self.start}, {self.end})")

    def overlaps(self, other: "Span") -> bool:
        return self.start <= other.end and other.start <= self.end

    def as_tuple(self) -> tuple[int, int]:
        return self.start, self.end


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"negative count in {self}")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()

    def rounded(self, ndigits: int = 4) -> dict:
        return {
            "precision": round(self.precision, ndigits),
            "recall": round(self.recall, ndigits),
            "f1": round(self.f1, ndigits),
        }


def f1_from(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf(counts: ConfusionCounts) -> PRF:
    undefined = []
    if counts.tp + counts.fp:
        p = counts.tp / (counts.tp + counts.fp)
    else:
        p = 0.0
        undefined.append("precision")
    if counts.tp + counts.fn:
        r = counts.tp / (counts.tp + counts.fn)
    else:
        r = 0.0
        undefined.append("recall")
    if p + r == 0:
        undefined.append("f1")
    return PRF(p, r, f1_from(p, r), tuple(undefined))


def prf_from_pr(precision: float, recall: float) -> PRF:
    return PRF(precision, recall, f1_from(precision, recall))


# -- BIO <-> spans ------------------------------------------------------------

def is_valid_bio(tags: Sequence) -> bool:
    prev = BioTag.O
    for t in tags:
        t = BioTag(t)
        if t is BioTag.I and prev is BioTag.O:
            return False
        prev = t
    return True


def repair_bio(tags: Sequence) -> list[BioTag]:
    """Rewrite every I-LOC that starts a sequence or follows O into B-LOC."""
    out = []
    prev = BioTag.O
    for t in tags:
        t = BioTag(t)
        if t is BioTag.I and prev is BioTag.O:
            t = BioTag.B
        out.append(t)
        prev = t
    return out


def spans_from_tags(tags: Sequence, tweet_id: str = "") -> list[Span]:
    spans = []
    start = None
    for i, t in enumerate(tags):
        t = BioTag(t)
        if t is BioTag.I:
            if start is None:
                raise InvalidBIOError(
                    f"I-LOC at position {i} does not continue a span; run repair_bio first"
                )
            continue
        if start is not None:
            spans.append(Span(start, i - 1, tweet_id))
            start = None
        if t is BioTag.B:
            start = i
    if start is not None:
        spans.append(Span(start, len(tags) - 1, tweet_id))
    return spans


def _check_disjoint(spans: Sequence[Span], what: str) -> list[Span]:
    ordered = sorted(spans)
    for a, b in zip(ordered, ordered[1:]):
        if a.overlaps(b):
            raise SpanError(f"overlapping {what} spans {a.as_tuple()} and {b.as_tuple()}")
    return ordered


def tags_from_spans(spans: Iterable[Span], length: int) -> list[BioTag]:
    tags = [BioTag.O] * length
    for s in _check_disjoint([_as_span(s) for s in spans], "input"):
        if s.end >= length:
            raise SpanError(f"span {s.as_tuple()} out of range for length {length}")
        tags[s.start] = BioTag.B
        for i in range(s.start + 1, s.end + 1):
            tags[i] = BioTag.I
    return tags


def _as_span(s) -> Span:
    return s if isinstance(s, Span) else Span(*s)


# -- matching -----------------------------------------------------------------

def match_spans(gold: Sequence[Span], pred: Sequence[Span], mode: MatchMode | str = MatchMode.EXACT) -> ConfusionCounts:
    """Greedy one-to-one matching in start order.

    Each prediction takes the earliest unmatched gold span it matches.  Both
    sides are disjoint and sorted, so the number of matches is maximal.
    """
    mode = MatchMode(mode)
    gold = _check_disjoint([_as_span(s) for s in gold], "gold")
    pred = _check_disjoint([_as_span(s) for s in pred], "predicted")

    used = [False] * len(gold)
    tp = 0
    lo = 0  # gold spans before lo end before the current prediction starts
    for p in pred:
        while lo < len(gold) and gold[lo].end < p.start:
            lo += 1
        for j in range(lo, len(gold)):
            g = gold[j]
            if g.start > p.end:
                break
            if used[j]:
                continue
            hit = g.as_tuple() == p.as_tuple() if mode is MatchMode.EXACT else g.overlaps(p)
            if hit:
                used[j] = True
                tp += 1
                break
    return ConfusionCounts(tp=tp, fp=len(pred) - tp, fn=len(gold) - tp)


def lett_counts(
    gold: Sequence[TokenAnnotatedTweet],
    predictions: Mapping[str, Sequence],
    mode: MatchMode | str = MatchMode.EXACT,
    policy: OmittedPolicy | str | None = None,
) -> tuple[ConfusionCounts, list[str]]:
    """Summed span counts plus the ids of gold tweets missing from ``predictions``."""
    mode = MatchMode(mode)
    policy = DEFAULT_POLICY[mode] if policy is None else OmittedPolicy(policy)

    gold_ids = [t.tweet_id for t in gold]
    if len(set(gold_ids)) != len(gold_ids):
        raise ValueError("gold tweet ids are not unique")
    unknown = sorted(set(predictions) - set(gold_ids))
    if unknown:
        raise UnknownTweetError(f"predictions for unknown tweet ids: {', '.join(unknown[:10])}")

    total = ConfusionCounts()
    omitted = []
    for tweet in gold:
        gold_spans = spans_from_tags(repair_bio(tweet.tags), tweet.tweet_id)
        if tweet.tweet_id not in predictions:
            omitted.append(tweet.tweet_id)
            if policy is OmittedPolicy.COUNT_AS_FALSE:
                total = total + ConfusionCounts(fn=len(gold_spans))
            continue
        pred_tags = predictions[tweet.tweet_id]
        if len(pred_tags) != len(tweet.tags):
            raise ValueError(
                f"tweet {tweet.tweet_id!r}: {len(pred_tags)} predicted tags for {len(tweet.tags)} words"
            )
        pred_spans = spans_from_tags(repair_bio(pred_tags), tweet.tweet_id)
        total = total + match_spans(gold_spans, pred_spans, mode)
    return total, omitted


def score_lett(
    gold: Sequence[TokenAnnotatedTweet],
    predictions: Mapping[str, Sequence],
    mode: MatchMode | str = MatchMode.EXACT,
    policy: OmittedPolicy | str | None = None,
) -> PRF:
    """Micro-averaged span PRF over the gold corpus.

    Tweets absent from ``predictions`` are scored by ``policy``: under
    ``count_as_false`` all their gold spans become false negatives, under
    ``ignore`` they are dropped.  The default policy depends on ``mode``
    (exact counts omissions as false, partial ignores them).
    """
    counts, _ = lett_counts(gold, predictions, mode, policy)
    return prf(counts)


def classification_counts(gold: Sequence[int], pred: Sequence[int], positive: int = 1) -> ConfusionCounts:
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold labels but {len(pred)} predictions")
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        if p == positive:
            if g == positive:
                tp += 1
            else:
                fp += 1
        elif g == positive:
            fn += 1
    return ConfusionCounts(tp, fp, fn)


def classification_prf(gold: Sequence[int], pred: Sequence[int], positive: int = 1) -> PRF:
    return prf(classification_counts(gold, pred, positive))


def macro_f1(gold: Sequence[int], pred: Sequence[int], labels: Sequence[int] = (0, 1)) -> float:
    return sum(classification_prf(gold, pred, positive=c).f1 for c in labels) / len(labels)


# -- reports ------------------------------------------------------------------

@dataclass
class ScoreRow:
    task: str
    mode: str
    policy: str | None
    counts: ConfusionCounts
    scores: PRF
    omitted: int = 0
    macro_f1: float | None = None

    def to_dict(self) -> dict:
        d = {
            "task": self.task,
            "mode": self.mode,
            "policy": self.policy,
            "counts": asdict(self.counts),
            **self.scores.rounded(4),
            "undefined": list(self.scores.undefined),
            "omitted": self.omitted,
        }
        if self.macro_f1 is not None:
            d["macro_f1"] = round(self.macro_f1, 4)
        return d


def format_table(rows: Sequence[ScoreRow]) -> str:
    header = f"{'Task':<5} {'Mode':<14} {'Policy':<15} {'TP':>6} {'FP':>6} {'FN':>6} {'Precision':>10} {'Recall':>8} {'F1-Score':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.task:<5} {r.mode:<14} {(r.policy or '-'):<15} {r.counts.tp:>6} {r.counts.fp:>6} {r.counts.fn:>6} "
            f"{r.scores.precision:>10.4f} {r.scores.recall:>8.4f} {r.scores.f1:>9.4f}"
        )
    return "\n".join(lines)


def write_report(rows: Sequence[ScoreRow], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"rows": [r.to_dict() for r in rows]}, indent=2) + "\n", encoding="utf-8")
