"""Encoder families behind one tokenize/encode contract.

The four pretrained families (bert, roberta, distilbert, albert) are loaded
through ``transformers``.  ``hash_test`` is an offline, parameter-free encoder
used by the test suite and smoke runs: subwords are fixed-width character
chunks, and vectors come from seeded hashing of the subword plus a small
positional term and a sequence-mean context term.  The context term is what
lets a begin-marker pooled vector carry information about the whole tweet.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
import torch

logger = logging.getLogger(__name__)

FAMILIES = ("bert", "roberta", "distilbert", "albert", "hash_test")
PRETRAINED_FAMILIES = FAMILIES[:4]

# Suggested multilingual starting points; never used as silent defaults.
SUGGESTED_CHECKPOINTS = {
    "bert": "bert-base-multilingual-cased",
    "roberta": "xlm-roberta-base",
    "distilbert": "distilbert-base-multilingual-cased",
    "albert": "albert-base-v2",
}

HASH_PAD, HASH_BEGIN, HASH_END = 0, 1, 2
HASH_VOCAB = 1 << 20
HASH_CHUNK = 4
HASH_SEED = 20220113
POSITION_SCALE = 0.1

WordsOrText = Union[str, Sequence[str]]


class EncoderLoadError(RuntimeError):
    pass


@dataclass(frozen=True)
class EncoderSpec:
    family: str
    checkpoint_id: str | None = None
    max_seq_len: int = 128
    hidden_dim: int = 64

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown encoder family {self.family!r}; expected one of {FAMILIES}")
        if self.max_seq_len < 8:
            raise ValueError("max_seq_len must be >= 8")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if self.family == "hash_test" and self.checkpoint_id:
            raise ValueError("hash_test takes no checkpoint_id")
        if self.family != "hash_test" and not self.checkpoint_id:
            raise ValueError(
                f"family {self.family!r} needs a checkpoint_id "
                f"(e.g. {SUGGESTED_CHECKPOINTS[self.family]!r} or a local directory)"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls(**d)


@dataclass
class EncodedBatch:
    """Tokenized examples, padded to the longest sequence in the batch.

    ``word_to_subword[b][w]`` is the position of the first subword of word
    ``w`` for word-list inputs (``None`` for raw-text inputs).  Words whose
    first subword fell past ``max_seq_len`` are absent from the map.
    """

    subword_ids: list[list[int]]
    attention_mask: list[list[int]]
    word_to_subword: list[list[int] | None]
    n_words: list[int]
    truncated_subwords: list[int]
    vectors: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.subword_ids)

    @property
    def truncated_examples(self) -> int:
        return sum(1 for t in self.truncated_subwords if t)

    @property
    def dropped_words(self) -> list[int]:
        return [
            0 if m is None else n - len(m) for m, n in zip(self.word_to_subword, self.n_words)
        ]

    def lengths(self) -> list[int]:
        return [sum(m) for m in self.attention_mask]

    def select(self, indices: Sequence[int], pad_id: int = 0) -> "EncodedBatch":
        lengths = self.lengths()
        width = max((lengths[i] for i in indices), default=0)
        return EncodedBatch(
            subword_ids=[(self.subword_ids[i][:lengths[i]] + [pad_id] * width)[:width] for i in indices],
            attention_mask=[([1] * lengths[i] + [0] * width)[:width] for i in indices],
            word_to_subword=[self.word_to_subword[i] for i in indices],
            n_words=[self.n_words[i] for i in indices],
            truncated_subwords=[self.truncated_subwords[i] for i in indices],
            vectors=None if self.vectors is None else self.vectors[list(indices), :width],
        )

    def ids_tensor(self) -> torch.Tensor:
        return torch.tensor(self.subword_ids, dtype=torch.long)

    def mask_tensor(self) -> torch.Tensor:
        return torch.tensor(self.attention_mask, dtype=torch.long)


def _pad(seqs: list[list[int]], pad_id: int) -> tuple[list[list[int]], list[list[int]]]:
    width = max(len(s) for s in seqs)
    ids = [s + [pad_id] * (width - len(s)) for s in seqs]
    mask = [[1] * len(s) + [0] * (width - len(s)) for s in seqs]
    return ids, mask


def _truncate(ids: list[int], word_ids: list[int | None], max_len: int) -> tuple[list[int], list[int | None], int]:
    """Keep the first ``max_len - 1`` positions and the trailing end marker."""
    if len(ids) <= max_len:
        return ids, word_ids, 0
    dropped = len(ids) - max_len
    return ids[:max_len - 1] + ids[-1:], word_ids[:max_len - 1] + word_ids[-1:], dropped


def _first_subwords(word_ids: list[int | None]) -> list[int]:
    out, prev = [], None
    for pos, w in enumerate(word_ids):
        if w is not None and w != prev:
            if w != len(out):
                raise RuntimeError(f"non-monotone word alignment at position {pos}")
            out.append(pos)
        prev = w
    return out


class Encoder:
    """Common interface; concrete encoders implement the tokenizer and forward pass."""

    spec: EncoderSpec
    pad_id: int = 0
    trainable: bool = False

    @property
    def hidden_dim(self) -> int:
        return self.spec.hidden_dim

    def _pieces(self, item: WordsOrText) -> tuple[list[int], list[int | None]]:
        raise NotImplementedError

    def tokenize_batch(self, items: Sequence[WordsOrText]) -> EncodedBatch:
        if not items:
            raise ValueError("cannot tokenize an empty batch")
        all_ids, w2s, n_words, truncated = [], [], [], []
        for item in items:
            is_words = not isinstance(item, str)
            if (is_words and len(item) == 0) or (not is_words and not item.strip()):
                raise ValueError("cannot tokenize empty input")
            ids, word_ids = self._pieces(item)
            ids, word_ids, dropped = _truncate(ids, word_ids, self.spec.max_seq_len)
            all_ids.append(ids)
            truncated.append(dropped)
            if is_words:
                w2s.append(_first_subwords(word_ids))
                n_words.append(len(item))
            else:
                w2s.append(None)
                n_words.append(0)
        ids, mask = _pad(all_ids, self.pad_id)
        if any(truncated):
            logger.debug("truncated %d example(s) to %d subwords", sum(1 for t in truncated if t), self.spec.max_seq_len)
        return EncodedBatch(ids, mask, w2s, n_words, truncated)

    def forward(self, batch: EncodedBatch) -> torch.Tensor:
        raise NotImplementedError

    def encode(self, batch: EncodedBatch) -> EncodedBatch:
        with torch.no_grad():
            vectors = self.forward(batch).detach().cpu().numpy()
        return replace(batch, vectors=vectors)

    def parameters(self):
        return []

    def train(self, mode: bool = True) -> None:
        pass

    def save(self, directory) -> None:
        pass


# -- hash_test ----------------------------------------------------------------

def hash_subword_id(piece: str) -> int:
    digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
    return 3 + int.from_bytes(digest, "little") % (HASH_VOCAB - 3)


def hash_subwords(word: str) -> list[str]:
    """Fixed-width chunks, continuation chunks marked with ``##``."""
    chunks = [word[i:i + HASH_CHUNK] for i in range(0, len(word), HASH_CHUNK)]
    return [c if i == 0 else "##" + c for i, c in enumerate(chunks)]


@lru_cache(maxsize=65536)
def _hash_vector(subword_id: int, dim: int) -> np.ndarray:
    if subword_id in (HASH_PAD, HASH_BEGIN, HASH_END):
        # markers carry no identity of their own; their vectors are position + context
        v = np.zeros(dim, dtype=np.float32)
        v.setflags(write=False)
        return v
    rng = np.random.Generator(np.random.PCG64([HASH_SEED, subword_id]))
    v = rng.standard_normal(dim).astype(np.float32)
    v.setflags(write=False)
    return v


@lru_cache(maxsize=64)
def _positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    k = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2 * (k // 2)) / dim)
    table = np.where(k % 2 == 0, np.sin(angle), np.cos(angle))
    return (POSITION_SCALE * table).astype(np.float32)


class HashTestEncoder(Encoder):
    pad_id = HASH_PAD

    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    def _pieces(self, item):
        words = item.split() if isinstance(item, str) else list(item)
        ids: list[int] = [HASH_BEGIN]
        word_ids: list[int | None] = [None]
        for w_idx, word in enumerate(words):
            for piece in hash_subwords(word):
                ids.append(hash_subword_id(piece))
                word_ids.append(w_idx)
        ids.append(HASH_END)
        word_ids.append(None)
        return ids, word_ids

    def subword_strings(self, words: Sequence[str]) -> list[str]:
        return ["[BEGIN]"] + [p for w in words for p in hash_subwords(w)] + ["[END]"]

    def forward(self, batch: EncodedBatch) -> torch.Tensor:
        dim = self.spec.hidden_dim
        width = len(batch.subword_ids[0]) if len(batch) else 0
        out = np.zeros((len(batch), width, dim), dtype=np.float32)
        pos = _positions(max(width, 1), dim)
        for b, (ids, mask) in enumerate(zip(batch.subword_ids, batch.attention_mask)):
            n = sum(mask)
            emb = np.stack([_hash_vector(i, dim) for i in ids[:n]])
            # gating each embedding by its position makes the shared context depend on word order
            context = (emb * (1.0 + pos[:n] / POSITION_SCALE)).mean(axis=0, keepdims=True)
            out[b, :n] = emb + pos[:n] + context
        return torch.from_numpy(out)


# -- pretrained families --------------------------------------------------------

class TransformersEncoder(Encoder):
    trainable = True

    def __init__(self, spec: EncoderSpec, offline: bool = False):
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:  # pragma: no cover - transformers is a hard dependency
            raise EncoderLoadError("the transformers package is required for pretrained encoders") from e

        kwargs = {"local_files_only": offline}
        tok_kwargs = dict(kwargs)
        if spec.family == "roberta":
            tok_kwargs["add_prefix_space"] = True
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(spec.checkpoint_id, **tok_kwargs)
            self.model = AutoModel.from_pretrained(spec.checkpoint_id, **kwargs)
        except Exception as e:
            raise EncoderLoadError(
                f"cannot load checkpoint {spec.checkpoint_id!r} for family {spec.family!r}: {e}"
            ) from e
        if not getattr(self.tokenizer, "is_fast", False):
            raise EncoderLoadError(
                f"checkpoint {spec.checkpoint_id!r} has no fast tokenizer; word alignment needs one"
            )
        self.spec = replace(spec, hidden_dim=int(self.model.config.hidden_size))
        self.pad_id = self.tokenizer.pad_token_id if self.tokenizer.pad_token_id is not None else 0

    def _pieces(self, item):
        if isinstance(item, str):
            enc = self.tokenizer(item, truncation=False)
        else:
            words = list(item)
            enc = self.tokenizer(words, is_split_into_words=True, truncation=False)
            covered = {w for w in enc.word_ids() if w is not None}
            if len(covered) != len(words):
                # words the tokenizer erases entirely (e.g. lone zero-width chars) become UNK
                words = [w if i in covered else self.tokenizer.unk_token for i, w in enumerate(words)]
                enc = self.tokenizer(words, is_split_into_words=True, truncation=False)
        return list(enc["input_ids"]), list(enc.word_ids())

    def forward(self, batch: EncodedBatch) -> torch.Tensor:
        out = self.model(input_ids=batch.ids_tensor(), attention_mask=batch.mask_tensor())
        return out.last_hidden_state

    def parameters(self):
        return list(self.model.parameters())

    def train(self, mode: bool = True) -> None:
        self.model.train(mode)

    def save(self, directory) -> None:
        self.model.save_pretrained(directory)
        self.tokenizer.save_pretrained(directory)


def load_encoder(spec: EncoderSpec, offline: bool = False) -> Encoder:
    if spec.family == "hash_test":
        return HashTestEncoder(spec)
    return TransformersEncoder(spec, offline=offline)


@lru_cache(maxsize=8)
def _cached_encoder(spec: EncoderSpec) -> Encoder:
    return load_encoder(spec, offline=spec.family == "hash_test")


def tokenize(words_or_text: WordsOrText, spec: EncoderSpec) -> EncodedBatch:
    """Tokenize one example: a raw string, or a pre-split list of words."""
    return _cached_encoder(spec).tokenize_batch([words_or_text])


def encode(batch: EncodedBatch, spec: EncoderSpec) -> EncodedBatch:
    return _cached_encoder(spec).encode(batch)
