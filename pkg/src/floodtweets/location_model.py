"""Location tagger: per-subword 3-way BIO classification read at first subwords.

Word tags are placed on each word's first subword; continuation subwords and
markers are masked out of the loss.  Prediction reads the same positions, so
training and inference see identical alignments.  Raw model output is always
passed through :func:`repair_bio`.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import torch

from .corpus_io import BioTag, TokenAnnotatedTweet
from .encoder_backend import EncodedBatch, Encoder, EncoderSpec, load_encoder
from .span_eval import MatchMode, OmittedPolicy, repair_bio, score_lett
from .training import TrainConfig, fit, load_artifact, make_head, read_metadata, save_artifact

__all__ = [
    "AlignedLabels", "LocationModel", "align_labels", "train", "predict_tags",
    "predict_tags_batch", "repair_bio", "save_model", "load_model", "MASKED",
]

TASK = "LETT"
LABELS = (BioTag.O, BioTag.B, BioTag.I)
LABEL_INDEX = {t: i for i, t in enumerate(LABELS)}
MASKED = None
IGNORE_INDEX = -100
INFERENCE_BATCH = 64


@dataclass
class AlignedLabels:
    subword_labels: list[BioTag | None]
    word_to_subword: list[int]
    dropped_words: int = 0

    @property
    def unmasked(self) -> int:
        return sum(1 for t in self.subword_labels if t is not MASKED)

    def label_ids(self) -> list[int]:
        return [IGNORE_INDEX if t is MASKED else LABEL_INDEX[t] for t in self.subword_labels]


def align_labels(tweet: TokenAnnotatedTweet, batch: EncodedBatch, index: int = 0) -> AlignedLabels:
    """Put each word's tag on its first subword; mask everything else."""
    w2s = batch.word_to_subword[index]
    if w2s is None:
        raise RuntimeError("batch was tokenized from raw text, not a word list")
    if batch.n_words[index] != len(tweet.words) or len(w2s) > len(tweet.words):
        raise RuntimeError(f"tweet {tweet.tweet_id!r}: word/subword map does not match its words")
    length = len(batch.subword_ids[index])
    labels: list[BioTag | None] = [MASKED] * length
    for word_idx, pos in enumerate(w2s):
        if not 0 <= pos < length or labels[pos] is not MASKED:
            raise RuntimeError(f"tweet {tweet.tweet_id!r}: inconsistent first-subword index {pos}")
        labels[pos] = tweet.tags[word_idx]
    return AlignedLabels(labels, list(w2s), len(tweet.words) - len(w2s))


@dataclass
class LocationModel:
    encoder: Encoder
    head: torch.nn.Linear
    config: TrainConfig
    history: list[dict] = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    @property
    def spec(self) -> EncoderSpec:
        return self.encoder.spec


def _flat_positions(batch: EncodedBatch) -> tuple[list[int], list[int]]:
    rows, cols = [], []
    for b, w2s in enumerate(batch.word_to_subword):
        rows.extend([b] * len(w2s))
        cols.extend(w2s)
    return rows, cols


def train(
    corpus: Sequence[TokenAnnotatedTweet],
    val: Sequence[TokenAnnotatedTweet] = (),
    spec: EncoderSpec | None = None,
    config: TrainConfig = TrainConfig(),
    offline: bool = False,
    encoder: Encoder | None = None,
) -> LocationModel:
    if not corpus:
        raise ValueError("empty training corpus")
    if encoder is None:
        if spec is None:
            raise ValueError("either spec or encoder is required")
        encoder = load_encoder(spec, offline=offline)

    stats: Counter = Counter()
    batch_all = encoder.tokenize_batch([list(t.words) for t in corpus])
    stats["truncated"] += batch_all.truncated_examples
    stats["dropped_words"] += sum(batch_all.dropped_words)
    # per-tweet targets at surviving first subwords, in word order
    targets = [
        torch.tensor([LABEL_INDEX[t.tags[w]] for w in range(len(batch_all.word_to_subword[i]))], dtype=torch.long)
        for i, t in enumerate(corpus)
    ]

    cached = None
    if not encoder.trainable:
        vectors = encoder.forward(batch_all).detach()
        cached = [vectors[i, w2s] for i, w2s in enumerate(batch_all.word_to_subword)]

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        head = make_head(encoder.hidden_dim, len(LABELS))
        model = LocationModel(encoder, head, config)
        loss_fn = torch.nn.CrossEntropyLoss()

        def batch_loss(idx):
            if cached is not None:
                reps = torch.cat([cached[i] for i in idx])
            else:
                sub = batch_all.select(idx, encoder.pad_id)
                rows, cols = _flat_positions(sub)
                reps = encoder.forward(sub)[rows, cols]
            gold = torch.cat([targets[i] for i in idx])
            if gold.numel() == 0:
                return head.weight.sum() * 0.0
            return loss_fn(head(reps), gold)

        def on_epoch_end(_epoch):
            if not val:
                return {"val_f1": None}
            preds = predict_tags_batch(model, [list(t.words) for t in val])
            pred_map = {t.tweet_id: p for t, p in zip(val, preds)}
            f1 = score_lett(val, pred_map, MatchMode.EXACT, OmittedPolicy.COUNT_AS_FALSE).f1
            return {"val_f1": f1}

        def set_mode(training: bool):
            encoder.train(training)
            head.train(training)

        params = list(head.parameters()) + list(encoder.parameters())
        model.history = fit(len(corpus), config, params, batch_loss, on_epoch_end, set_mode)

    model.counters = dict(stats)
    return model


def predict_tags_batch(model: LocationModel, sentences: Sequence[Sequence[str]], stats: Counter | None = None) -> list[list[BioTag]]:
    out: list[list[BioTag]] = []
    with torch.no_grad():
        for start in range(0, len(sentences), INFERENCE_BATCH):
            chunk = [list(w) for w in sentences[start:start + INFERENCE_BATCH]]
            if any(not words for words in chunk):
                raise ValueError("cannot tag an empty word list")
            batch = model.encoder.tokenize_batch(chunk)
            vectors = model.encoder.forward(batch)
            for b, words in enumerate(chunk):
                w2s = batch.word_to_subword[b]
                tags = [BioTag.O] * len(words)
                if w2s:
                    best = model.head(vectors[b, w2s]).argmax(dim=-1).tolist()
                    for w, k in enumerate(best):
                        tags[w] = LABELS[k]
                if stats is not None:
                    stats["truncated"] += 1 if batch.truncated_subwords[b] else 0
                    stats["dropped_words"] += len(words) - len(w2s)
                out.append(repair_bio(tags))
    return out


def predict_tags(model: LocationModel, words: Sequence[str]) -> list[BioTag]:
    if not words:
        raise ValueError("cannot tag an empty word list")
    return predict_tags_batch(model, [words])[0]


def save_model(model: LocationModel, directory) -> None:
    save_artifact(
        directory,
        {
            "task": TASK,
            "encoder": model.spec.to_dict(),
            "cleaning": "unclean",
            "train_config": model.config.to_dict(),
            "history": model.history,
            "counters": model.counters,
        },
        model.head,
        model.encoder,
    )


def load_model(directory) -> LocationModel:
    meta = read_metadata(directory)
    if meta.get("task") != TASK:
        raise ValueError(f"{directory} holds a {meta.get('task')} model, not {TASK}")
    meta, head, encoder = load_artifact(directory, len(LABELS))
    return LocationModel(
        encoder=encoder,
        head=head,
        config=TrainConfig.from_dict(meta["train_config"]),
        history=meta["history"],
        counters=meta.get("counters", {}),
    )
