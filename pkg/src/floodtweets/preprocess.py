"""Tweet cleaning for the relevance task.

Stages run in a fixed order: URLs, mentions, emoji, hashtag marks,
lowercasing, stop words, whitespace collapsing.  Removed material is replaced
by a space so that no stage can glue two fragments into a new match; this is
what makes :func:`clean_text` idempotent.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

STOPWORDS_FILE = "stopwords_it.txt"
EMOJI_FILE = "emoji_ranges.txt"

URL_RE = re.compile(r"(?:https?://|\bwww\.)\S*", re.IGNORECASE)
# a mention swallows any chained @ segments so "@a@b" cannot leave "@b" behind
MENTION_RE = re.compile(r"(?<![\w@])@\w+(?:@\w*)*")
HASHTAG_MARK_RE = re.compile(r"(?<!\S)#+(?=\w)")


def _data_lines(name: str) -> tuple[list[str], dict[str, str]]:
    """Non-comment lines of a bundled data file plus ``# key: value`` headers."""
    text = resources.files("floodtweets.data").joinpath(name).read_text(encoding="utf-8")
    lines, meta = [], {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        lines.append(line)
    return lines, meta


@lru_cache(maxsize=None)
def _stopword_data() -> tuple[frozenset[str], str]:
    words, meta = _data_lines(STOPWORDS_FILE)
    return frozenset(words), meta.get("version", "unknown")


def default_stopwords() -> set[str]:
    """The bundled Italian stop-word list (a fresh copy on every call)."""
    return set(_stopword_data()[0])


def stopwords_version() -> str:
    return _stopword_data()[1]


def load_stopwords(path) -> set[str]:
    """Read a stop-word file: one word per line, ``#`` comments allowed."""
    words = set()
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if line and not line.startswith("#"):
                words.add(line.lower())
    return words


@lru_cache(maxsize=None)
def emoji_pattern() -> re.Pattern:
    lines, _ = _data_lines(EMOJI_FILE)
    parts = []
    for line in lines:
        start, end = line.split()[:2]
        parts.append(f"\\U{int(start, 16):08X}-\\U{int(end, 16):08X}")
    return re.compile("[" + "".join(parts) + "]+")


@dataclass(frozen=True)
class CleaningConfig:
    remove_urls: bool = True
    remove_mentions: bool = True
    remove_emojis: bool = True
    remove_stopwords: bool = True
    strip_hashtags: bool = True
    lowercase: bool = True
    collapse_whitespace: bool = True
    stopwords: frozenset = field(default_factory=lambda: frozenset(default_stopwords()))
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        for w in self.stopwords:
            if not w or w != w.lower() or any(c.isspace() for c in w):
                raise ValueError(f"invalid stop word {w!r}: must be non-empty, lowercase, without whitespace")

    @classmethod
    def clean(cls, stopwords=None) -> "CleaningConfig":
        sw = default_stopwords() if stopwords is None else stopwords
        return cls(stopwords=frozenset(sw), name="clean")

    @classmethod
    def unclean(cls) -> "CleaningConfig":
        return cls(
            remove_urls=False,
            remove_mentions=False,
            remove_emojis=False,
            remove_stopwords=False,
            strip_hashtags=False,
            lowercase=False,
            collapse_whitespace=False,
            stopwords=frozenset(),
            name="unclean",
        )

    @classmethod
    def preset(cls, name: str) -> "CleaningConfig":
        if name == "clean":
            return cls.clean()
        if name == "unclean":
            return cls.unclean()
        raise ValueError(f"unknown cleaning preset {name!r} (expected 'clean' or 'unclean')")

    @property
    def is_identity(self) -> bool:
        return not (
            self.remove_urls or self.remove_mentions or self.remove_emojis or self.remove_stopwords
            or self.strip_hashtags or self.lowercase or self.collapse_whitespace
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "remove_urls": self.remove_urls,
            "remove_mentions": self.remove_mentions,
            "remove_emojis": self.remove_emojis,
            "remove_stopwords": self.remove_stopwords,
            "strip_hashtags": self.strip_hashtags,
            "lowercase": self.lowercase,
            "collapse_whitespace": self.collapse_whitespace,
            "stopwords": sorted(self.stopwords),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CleaningConfig":
        return cls(**{**d, "stopwords": frozenset(d.get("stopwords", ()))})


def _strip_edges(token: str) -> str:
    # core of a token for stop-word lookup: "di," -> "di"
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def clean_text(text: str, config: CleaningConfig) -> str:
    if config.is_identity:
        return text
    if config.remove_urls:
        text = URL_RE.sub(" ", text)
    if config.remove_mentions:
        text = MENTION_RE.sub(" ", text)
    if config.remove_emojis:
        text = emoji_pattern().sub(" ", text)
    if config.strip_hashtags:
        text = HASHTAG_MARK_RE.sub(" ", text)
    if config.lowercase:
        text = text.lower()
    if config.remove_stopwords and config.stopwords:
        text = " ".join(t for t in text.split() if _strip_edges(t) not in config.stopwords)
    if config.collapse_whitespace:
        text = " ".join(text.split())
    return text
