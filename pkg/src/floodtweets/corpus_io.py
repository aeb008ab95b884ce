"""Reading, writing and splitting the two corpus formats.

RCTP corpora are UTF-8 TSV files with a ``tweet_id<TAB>text<TAB>label`` header
(label column optional).  Tabs, newlines and backslashes inside tweet text are
escaped as ``\\t``, ``\\n``/``\\r`` and ``\\\\``.

LETT corpora are CoNLL-style: a ``# tweet_id = <id>`` comment line, then one
``word<TAB>tag`` line per word, with a single blank line between tweets.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence, TypeVar, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
T = TypeVar("T")

RCTP_HEADER = ("tweet_id", "text", "label")
PREDICTION_HEADER = ("tweet_id", "label")
DEFAULT_RATIOS = (0.70, 0.20, 0.10)


class CorpusError(ValueError):
    """Base class for corpus problems."""


class ParseError(CorpusError):
    def __init__(self, message: str, path: PathLike | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(CorpusError):
    pass


class BioTag(str, Enum):
    B = "B-LOC"
    I = "I-LOC"  # noqa: E741
    O = "O"  # noqa: E741

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class RelevanceExample:
    tweet_id: str
    text: str
    label: int | None = None

    def __post_init__(self):
        if not self.tweet_id:
            raise ValidationError("tweet_id must be non-empty")
        if not self.text.strip():
            raise ValidationError(f"tweet {self.tweet_id!r} has empty text")
        if self.label is not None and self.label not in (0, 1):
            raise ValidationError(f"tweet {self.tweet_id!r}: label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class TokenAnnotatedTweet:
    tweet_id: str
    words: tuple[str, ...]
    tags: tuple[BioTag, ...]

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "tags", tuple(BioTag(t) for t in self.tags))
        if not self.tweet_id:
            raise ValidationError("tweet_id must be non-empty")
        if not self.words:
            raise ValidationError(f"tweet {self.tweet_id!r} has no words")
        if len(self.words) != len(self.tags):
            raise ValidationError(
                f"tweet {self.tweet_id!r}: {len(self.words)} words but {len(self.tags)} tags"
            )
        for w in self.words:
            if not w or any(c.isspace() for c in w):
                raise ValidationError(f"tweet {self.tweet_id!r}: invalid word {w!r}")


@dataclass
class DataSplit:
    train: list
    test: list
    validation: list
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    seed: int = 42

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.test), len(self.validation)


# -- escaping -----------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_field(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def unescape_field(text: str) -> str:
    if "\\" not in text:
        return text
    out = []
    chars = iter(text)
    for c in chars:
        if c != "\\":
            out.append(c)
            continue
        nxt = next(chars, "")
        # unknown escapes are kept verbatim
        out.append(_UNESCAPES.get(nxt, "\\" + nxt))
    return "".join(out)


def _check_unique(ids: Sequence[str], path: PathLike | None = None) -> None:
    seen: set[str] = set()
    for tid in ids:
        if tid in seen:
            where = f" in {path}" if path is not None else ""
            raise ValidationError(f"duplicate tweet_id {tid!r}{where}")
        seen.add(tid)


def _read_lines(path: PathLike) -> list[str]:
    with open(path, encoding="utf-8", newline="") as f:
        data = f.read()
    if data.startswith("﻿"):
        data = data[1:]
    return data.split("\n")


# -- RCTP ---------------------------------------------------------------------

def read_rctp(path: PathLike) -> list[RelevanceExample]:
    lines = _read_lines(path)
    if not lines or not lines[0].rstrip("\r"):
        raise ParseError("missing header row", path, 1)
    header = tuple(lines[0].rstrip("\r").split("\t"))
    if header not in (RCTP_HEADER, RCTP_HEADER[:2]):
        raise ParseError(f"expected header {'<TAB>'.join(RCTP_HEADER)!r}, got {lines[0]!r}", path, 1)
    ncols = len(header)

    examples = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != ncols:
            raise ParseError(f"expected {ncols} columns, got {len(cols)}", path, lineno)
        label = None
        if ncols == 3 and cols[2] != "":
            try:
                label = int(cols[2])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: label must be 0 or 1, got {cols[2]!r}") from None
        try:
            examples.append(RelevanceExample(cols[0], unescape_field(cols[1]), label))
        except ValidationError as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
    _check_unique([e.tweet_id for e in examples], path)
    return examples


def write_rctp(examples: Sequence[RelevanceExample], path: PathLike) -> None:
    with_labels = any(e.label is not None for e in examples)
    header = RCTP_HEADER if with_labels else RCTP_HEADER[:2]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(header) + "\n")
        for e in examples:
            cols = [e.tweet_id, escape_field(e.text)]
            if with_labels:
                cols.append("" if e.label is None else str(e.label))
            f.write("\t".join(cols) + "\n")


def read_rctp_predictions(path: PathLike) -> dict[str, int]:
    """Read a ``tweet_id<TAB>label`` prediction file into an ordered mapping."""
    lines = _read_lines(path)
    if not lines or tuple(lines[0].rstrip("\r").split("\t")) != PREDICTION_HEADER:
        raise ParseError("expected header 'tweet_id<TAB>label'", path, 1)
    preds: dict[str, int] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"expected 2 columns, got {len(cols)}", path, lineno)
        if cols[1] not in ("0", "1"):
            raise ValidationError(f"{path}:{lineno}: label must be 0 or 1, got {cols[1]!r}")
        if cols[0] in preds:
            raise ValidationError(f"duplicate tweet_id {cols[0]!r} in {path}")
        preds[cols[0]] = int(cols[1])
    return preds


# -- LETT ---------------------------------------------------------------------

_ID_PREFIX = "# tweet_id ="


def read_lett(path: PathLike, require_tags: bool = True) -> list[TokenAnnotatedTweet]:
    """Parse a CoNLL-style LETT file.

    A line is a comment iff it starts with ``#`` and contains no tab, so
    hashtag words (``#alluvione<TAB>O``) are read as words.  With
    ``require_tags=False`` bare ``word`` lines are accepted and tagged ``O``,
    which is how unannotated input is fed to the tagger.
    """
    tweets: list[TokenAnnotatedTweet] = []
    empty_blocks = 0
    tweet_id: str | None = None
    words: list[str] = []
    tags: list[BioTag] = []
    block_start = 1
    started = False

    def flush():
        nonlocal tweet_id, words, tags, empty_blocks, started
        if started:
            if not words:
                empty_blocks += 1
            elif tweet_id is None:
                raise ParseError("tweet block without '# tweet_id = <id>' comment", path, block_start)
            else:
                tweets.append(TokenAnnotatedTweet(tweet_id, tuple(words), tuple(tags)))
        tweet_id, words, tags, started = None, [], [], False

    for lineno, raw in enumerate(_read_lines(path), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if not started:
            started = True
            block_start = lineno
        if line.startswith("#") and "\t" not in line:
            if line.startswith(_ID_PREFIX):
                if words:
                    raise ParseError("tweet_id comment after words in the same block", path, lineno)
                tweet_id = line[len(_ID_PREFIX):].strip()
                if not tweet_id:
                    raise ParseError("empty tweet_id", path, lineno)
            continue
        cols = line.split("\t")
        if len(cols) == 1 and not require_tags:
            cols.append(BioTag.O.value)
        if len(cols) != 2:
            raise ParseError(f"expected 'word<TAB>tag', got {len(cols)} columns", path, lineno)
        word, tag = cols
        try:
            tags.append(BioTag(tag))
        except ValueError:
            raise ParseError(f"unknown tag {tag!r} (allowed: B-LOC, I-LOC, O)", path, lineno) from None
        if not word or any(c.isspace() for c in word):
            raise ParseError(f"invalid word {word!r}", path, lineno)
        words.append(word)
    flush()

    if empty_blocks:
        logger.warning("%s: skipped %d empty block(s)", path, empty_blocks)
    _check_unique([t.tweet_id for t in tweets], path)
    return tweets


def write_lett(tweets: Sequence[TokenAnnotatedTweet], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i, tweet in enumerate(tweets):
            if i:
                f.write("\n")
            f.write(f"{_ID_PREFIX} {tweet.tweet_id}\n")
            for word, tag in zip(tweet.words, tweet.tags):
                f.write(f"{word}\t{tag.value}\n")


def write_predictions(examples: Sequence, predictions: Sequence, path: PathLike, task: str | None = None) -> None:
    """Write predictions aligned with ``examples``.

    RCTP examples get a ``tweet_id<TAB>label`` file; LETT tweets get the LETT
    block format with the predicted tags in place of the gold ones.  ``task``
    only matters for an empty example list, which otherwise carries no type.
    """
    if len(examples) != len(predictions):
        raise ValueError(f"{len(examples)} examples but {len(predictions)} predictions")
    if examples:
        task = "LETT" if isinstance(examples[0], TokenAnnotatedTweet) else "RCTP"
    if task == "LETT":
        write_lett(
            [TokenAnnotatedTweet(t.tweet_id, t.words, tuple(p)) for t, p in zip(examples, predictions)],
            path,
        )
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(PREDICTION_HEADER) + "\n")
        for e, p in zip(examples, predictions):
            if int(p) not in (0, 1):
                raise ValidationError(f"prediction for {e.tweet_id!r} must be 0 or 1, got {p!r}")
            f.write(f"{e.tweet_id}\t{int(p)}\n")


def sniff_format(path: PathLike) -> str:
    """Return ``"rctp"`` or ``"lett"`` from the first non-blank line."""
    for raw in _read_lines(path):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        if line.split("\t")[0] == "tweet_id":
            return "rctp"
        if line.startswith("#") or "\t" in line:
            return "lett"
        break
    raise ParseError("cannot determine corpus format (empty or unrecognised file)", path, None)


# -- size sanity check -----------------------------------------------------------

# published benchmark sizes; LETT only has an approximate total across both files
EXPECTED_SIZES = {("RCTP", "dev"): 5337, ("RCTP", "test"): 1315}
LETT_APPROX_TOTAL = 6000
LETT_TOLERANCE = 0.25


def check_corpus_sizes(task: str, sizes: dict[str, int]) -> list[str]:
    """Compare corpus sizes with the benchmark's; returns (and logs) warnings, never raises."""
    warnings = []
    if task == "RCTP":
        for role, n in sizes.items():
            expected = EXPECTED_SIZES.get((task, role))
            if expected is not None and n != expected:
                warnings.append(f"RCTP {role} set has {n} examples; the benchmark release has {expected}")
    elif task == "LETT":
        total = sum(sizes.values())
        if abs(total - LETT_APPROX_TOTAL) > LETT_TOLERANCE * LETT_APPROX_TOTAL:
            warnings.append(f"LETT dev+test has {total} tweets; the benchmark release has about {LETT_APPROX_TOTAL}")
    for w in warnings:
        logger.warning(w)
    return warnings


# -- splitting ----------------------------------------------------------------

def split_sizes(n: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> tuple[int, ...]:
    """Largest-remainder allocation of ``n`` items over ``ratios``."""
    raw = [round(n * r, 9) for r in ratios]
    sizes = [math.floor(x) for x in raw]
    remainder = n - sum(sizes)
    # ties broken by position so the result is fully deterministic
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[:remainder]:
        sizes[i] += 1
    return tuple(sizes)


def split(corpus: Sequence[T], ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 42) -> DataSplit:
    """Shuffle with a seeded generator, then cut into train/test/validation."""
    if len(ratios) != 3:
        raise ValueError("ratios must be (train, test, validation)")
    if any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must be non-negative and sum to 1.0, got {tuple(ratios)}")
    if len(corpus) < 10:
        raise ValueError(f"corpus too small to split: {len(corpus)} examples (need at least 10)")
    items = list(corpus)
    random.Random(seed).shuffle(items)
    n_train, n_test, _ = split_sizes(len(items), ratios)
    return DataSplit(
        train=items[:n_train],
        test=items[n_train:n_train + n_test],
        validation=items[n_train + n_test:],
        ratios=tuple(ratios),
        seed=seed,
    )
