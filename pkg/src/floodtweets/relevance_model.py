"""Binary flood-relevance classifier: encoder + single-logit head on the begin marker."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .corpus_io import RelevanceExample
from .encoder_backend import EncodedBatch, Encoder, EncoderSpec, load_encoder
from .preprocess import CleaningConfig, clean_text
from .span_eval import classification_prf, macro_f1
from .training import TrainConfig, fit, load_artifact, make_head, read_metadata, save_artifact

TASK = "RCTP"
EMPTY_PLACEHOLDER = "[EMPTY]"
INFERENCE_BATCH = 64


@dataclass
class RelevanceModel:
    encoder: Encoder
    head: torch.nn.Linear
    cleaning: CleaningConfig
    config: TrainConfig
    history: list[dict] = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    @property
    def spec(self) -> EncoderSpec:
        return self.encoder.spec


def _placeholder(encoder: Encoder) -> str:
    tok = getattr(encoder, "tokenizer", None)
    return tok.unk_token if tok is not None and tok.unk_token else EMPTY_PLACEHOLDER


def prepare_texts(texts: Sequence[str], cleaning: CleaningConfig, encoder: Encoder, stats: Counter | None = None) -> list[str]:
    """Clean, then swap anything emptied by cleaning for the placeholder token."""
    out = []
    for text in texts:
        cleaned = clean_text(text, cleaning)
        if not cleaned.strip():
            cleaned = _placeholder(encoder)
            if stats is not None:
                stats["empty_after_cleaning"] += 1
        out.append(cleaned)
    return out


def _pooled(encoder: Encoder, batch: EncodedBatch) -> torch.Tensor:
    return encoder.forward(batch)[:, 0, :]


def train(
    examples: Sequence[RelevanceExample],
    val: Sequence[RelevanceExample] = (),
    spec: EncoderSpec | None = None,
    config: TrainConfig = TrainConfig(),
    cleaning: CleaningConfig | None = None,
    offline: bool = False,
    encoder: Encoder | None = None,
) -> RelevanceModel:
    if not examples:
        raise ValueError("empty training set")
    unlabeled = [e.tweet_id for e in list(examples) + list(val) if e.label is None]
    if unlabeled:
        raise ValueError(f"unlabeled examples: {', '.join(unlabeled[:10])}")
    if encoder is None:
        if spec is None:
            raise ValueError("either spec or encoder is required")
        encoder = load_encoder(spec, offline=offline)
    cleaning = CleaningConfig.unclean() if cleaning is None else cleaning

    stats: Counter = Counter()
    texts = prepare_texts([e.text for e in examples], cleaning, encoder, stats)
    batch_all = encoder.tokenize_batch(texts)
    stats["truncated"] += batch_all.truncated_examples
    labels = torch.tensor([float(e.label) for e in examples])

    cached = None
    if not encoder.trainable:
        cached = _pooled(encoder, batch_all).detach()

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        head = make_head(encoder.hidden_dim, 1)
        model = RelevanceModel(encoder, head, cleaning, config)
        loss_fn = torch.nn.BCEWithLogitsLoss()

        def batch_loss(idx):
            reps = cached[idx] if cached is not None else _pooled(encoder, batch_all.select(idx, encoder.pad_id))
            return loss_fn(head(reps).squeeze(-1), labels[idx])

        def on_epoch_end(_epoch):
            if not val:
                return {"val_f1": None, "val_macro_f1": None}
            gold = [e.label for e in val]
            pred = predict_batch(model, [e.text for e in val])
            return {"val_f1": classification_prf(gold, pred).f1, "val_macro_f1": macro_f1(gold, pred)}

        def set_mode(training: bool):
            encoder.train(training)
            head.train(training)

        params = list(head.parameters()) + list(encoder.parameters())
        model.history = fit(len(examples), config, params, batch_loss, on_epoch_end, set_mode)

    model.counters = dict(stats)
    return model


def predict_proba_batch(model: RelevanceModel, texts: Sequence[str], stats: Counter | None = None) -> np.ndarray:
    if not texts:
        return np.zeros(0)
    prepared = prepare_texts(texts, model.cleaning, model.encoder, stats)
    out = []
    with torch.no_grad():
        for start in range(0, len(prepared), INFERENCE_BATCH):
            batch = model.encoder.tokenize_batch(prepared[start:start + INFERENCE_BATCH])
            if stats is not None:
                stats["truncated"] += batch.truncated_examples
            logits = model.head(_pooled(model.encoder, batch)).squeeze(-1)
            out.extend(torch.sigmoid(logits).tolist())
    return np.asarray(out)


def predict_proba(model: RelevanceModel, text: str) -> float:
    return float(predict_proba_batch(model, [text])[0])


def predict(model: RelevanceModel, text: str, threshold: float | None = None) -> int:
    threshold = model.config.threshold if threshold is None else threshold
    return int(predict_proba(model, text) >= threshold)


def predict_batch(model: RelevanceModel, texts: Sequence[str], threshold: float | None = None, stats: Counter | None = None) -> list[int]:
    threshold = model.config.threshold if threshold is None else threshold
    return [int(p >= threshold) for p in predict_proba_batch(model, texts, stats)]


def save_model(model: RelevanceModel, directory) -> None:
    save_artifact(
        directory,
        {
            "task": TASK,
            "encoder": model.spec.to_dict(),
            "cleaning": model.cleaning.to_dict(),
            "train_config": model.config.to_dict(),
            "history": model.history,
            "counters": model.counters,
        },
        model.head,
        model.encoder,
    )


def load_model(directory) -> RelevanceModel:
    meta = read_metadata(directory)
    if meta.get("task") != TASK:
        raise ValueError(f"{directory} holds a {meta.get('task')} model, not {TASK}")
    meta, head, encoder = load_artifact(directory, 1)
    return RelevanceModel(
        encoder=encoder,
        head=head,
        cleaning=CleaningConfig.from_dict(meta["cleaning"]),
        config=TrainConfig.from_dict(meta["train_config"]),
        history=meta["history"],
        counters=meta.get("counters", {}),
    )
