"""Training configuration, the shared mini-batch loop, and model artifacts."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .encoder_backend import Encoder, EncoderSpec, HashTestEncoder, TransformersEncoder

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = 1
METADATA_FILE = "metadata.json"
HEAD_FILE = "head.pt"
ENCODER_DIR = "encoder"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 20
    learning_rate: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 42
    threshold: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie strictly between 0 and 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def make_head(in_dim: int, out_dim: int) -> torch.nn.Linear:
    head = torch.nn.Linear(in_dim, out_dim)
    torch.nn.init.normal_(head.weight, std=0.02)
    torch.nn.init.zeros_(head.bias)
    return head


def fit(
    n_examples: int,
    config: TrainConfig,
    parameters: Sequence[torch.nn.Parameter],
    batch_loss: Callable[[list[int]], torch.Tensor],
    on_epoch_end: Callable[[int], dict] | None = None,
    set_train_mode: Callable[[bool], None] | None = None,
) -> list[dict]:
    """Run ``config.epochs`` epochs of shuffled mini-batch Adam.

    ``batch_loss(indices)`` returns the mean loss over the batch.  The logged
    epoch loss is the example-weighted mean of batch losses.  Caller is
    responsible for seeding torch before calling (parameter init happens
    outside).
    """
    optimizer = torch.optim.Adam(
        parameters, lr=config.learning_rate, betas=(config.beta1, config.beta2), eps=config.eps
    )
    rng = np.random.Generator(np.random.PCG64(config.seed))
    history = []
    for epoch in range(1, config.epochs + 1):
        if set_train_mode:
            set_train_mode(True)
        order = rng.permutation(n_examples).tolist()
        total, steps = 0.0, 0
        for start in range(0, n_examples, config.batch_size):
            idx = order[start:start + config.batch_size]
            optimizer.zero_grad()
            loss = batch_loss(idx)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(idx)
            steps += 1
        if set_train_mode:
            set_train_mode(False)
        record = {"epoch": epoch, "loss": total / n_examples, "steps": steps}
        if on_epoch_end:
            record.update(on_epoch_end(epoch))
        logger.info("epoch %d/%d loss=%.4f", epoch, config.epochs, record["loss"])
        history.append(record)
    return history


def save_artifact(directory, metadata: dict, head: torch.nn.Module, encoder: Encoder) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(head.state_dict(), directory / HEAD_FILE)
    if encoder.trainable:
        encoder.save(directory / ENCODER_DIR)
    meta = {"format_version": ARTIFACT_VERSION, **metadata}
    (directory / METADATA_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return directory


def read_metadata(directory) -> dict:
    path = Path(directory) / METADATA_FILE
    if not path.is_file():
        raise FileNotFoundError(f"{directory} is not a model artifact (missing {METADATA_FILE})")
    meta = json.loads(path.read_text(encoding="utf-8"))
    version = meta.get("format_version")
    if version != ARTIFACT_VERSION:
        raise ValueError(f"unsupported model artifact version {version!r} (expected {ARTIFACT_VERSION})")
    return meta


def load_artifact(directory, out_dim: int) -> tuple[dict, torch.nn.Linear, Encoder]:
    directory = Path(directory)
    meta = read_metadata(directory)
    spec = EncoderSpec.from_dict(meta["encoder"])
    if spec.family == "hash_test":
        encoder: Encoder = HashTestEncoder(spec)
    else:
        local = replace(spec, checkpoint_id=str(directory / ENCODER_DIR))
        encoder = TransformersEncoder(local, offline=True)
        encoder.spec = replace(encoder.spec, checkpoint_id=spec.checkpoint_id)
    head = torch.nn.Linear(encoder.hidden_dim, out_dim)
    head.load_state_dict(torch.load(directory / HEAD_FILE, weights_only=True))
    head.eval()
    encoder.train(False)
    return meta, head, encoder
