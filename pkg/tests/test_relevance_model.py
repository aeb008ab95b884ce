from __future__ import annotations

import pytest
import torch

from floodtweets import relevance_model as rm
from floodtweets.corpus_io import RelevanceExample
from floodtweets.encoder_backend import EncoderSpec
from floodtweets.pipeline import HEAD_ONLY_LEARNING_RATE
from floodtweets.preprocess import CleaningConfig
from floodtweets.training import TrainConfig

from conftest import separable_relevance_fixture

HASH = EncoderSpec("hash_test")
FAST = TrainConfig(learning_rate=HEAD_ONLY_LEARNING_RATE)


@pytest.fixture(scope="module")
def trained():
    examples = separable_relevance_fixture(0)
    return examples, rm.train(examples, spec=HASH, config=FAST)


def accuracy(model, examples):
    preds = rm.predict_batch(model, [e.text for e in examples])
    return sum(p == e.label for p, e in zip(preds, examples)) / len(examples)


def test_overfits_separable_fixture(trained):
    examples, model = trained
    assert accuracy(model, examples) >= 0.95


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_overfit_other_seeds(seed):
    examples = separable_relevance_fixture(seed)
    model = rm.train(examples, spec=HASH, config=TrainConfig(learning_rate=HEAD_ONLY_LEARNING_RATE, seed=seed))
    assert accuracy(model, examples) >= 0.95


def test_history_shape_and_loss_decreases(trained):
    _, model = trained
    assert len(model.history) == 20
    assert all(h["steps"] == 1 for h in model.history)  # 32 examples, batch 32
    assert model.history[-1]["loss"] < model.history[0]["loss"]


def test_steps_per_epoch():
    examples = separable_relevance_fixture(0) + [
        RelevanceExample(f"x{e.tweet_id}", e.text, e.label) for e in separable_relevance_fixture(9)
    ]
    model = rm.train(examples, spec=HASH, config=TrainConfig(learning_rate=0.05, epochs=2))
    assert [h["steps"] for h in model.history] == [2, 2]


def test_probabilities_in_unit_interval(trained):
    examples, model = trained
    probs = rm.predict_proba_batch(model, [e.text for e in examples] + ["", "😀"])
    assert ((probs >= 0) & (probs <= 1)).all()


@pytest.mark.parametrize("proba, threshold, expected", [(0.73, 0.5, 1), (0.5, 0.5, 1), (0.73, 0.99, 0), (0.49, 0.5, 0)])
def test_threshold_rule(monkeypatch, trained, proba, threshold, expected):
    _, model = trained
    monkeypatch.setattr(rm, "predict_proba", lambda m, t: proba)
    assert rm.predict(model, "x", threshold=threshold) == expected


def test_threshold_monotone(trained):
    examples, model = trained
    texts = [e.text for e in examples]
    counts = [sum(rm.predict_batch(model, texts, threshold=t)) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert counts == sorted(counts, reverse=True)


def test_batched_matches_single(trained):
    examples, model = trained
    batched = rm.predict_proba_batch(model, [e.text for e in examples[:5]])
    single = [rm.predict_proba(model, e.text) for e in examples[:5]]
    assert batched.tolist() == pytest.approx(single, abs=1e-6)


def test_deterministic_training():
    examples = separable_relevance_fixture(0)
    a = rm.train(examples, spec=HASH, config=FAST)
    b = rm.train(examples, spec=HASH, config=FAST)
    assert a.history == b.history
    assert torch.equal(a.head.weight, b.head.weight)


def test_training_does_not_disturb_global_rng():
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    rm.train(separable_relevance_fixture(0), spec=HASH, config=TrainConfig(epochs=1))
    assert torch.equal(torch.rand(3), expected)


def test_save_load_round_trip(tmp_path, trained):
    examples, model = trained
    rm.save_model(model, tmp_path / "m")
    back = rm.load_model(tmp_path / "m")
    texts = [e.text for e in examples]
    assert rm.predict_proba_batch(back, texts).tolist() == rm.predict_proba_batch(model, texts).tolist()
    assert back.cleaning == model.cleaning
    assert back.config == model.config
    assert back.history == model.history


def test_cleaning_preset_stored(tmp_path):
    model = rm.train(separable_relevance_fixture(0), spec=HASH, config=TrainConfig(epochs=1),
                     cleaning=CleaningConfig.clean())
    rm.save_model(model, tmp_path / "m")
    assert rm.load_model(tmp_path / "m").cleaning == CleaningConfig.clean()


def test_empty_after_cleaning_counted():
    examples = separable_relevance_fixture(0) + [RelevanceExample("e", "@rai https://t.co/x", 0)]
    model = rm.train(examples, spec=HASH, config=TrainConfig(epochs=1), cleaning=CleaningConfig.clean())
    assert model.counters["empty_after_cleaning"] == 1


def test_rejects_unlabeled_and_empty():
    with pytest.raises(ValueError, match="unlabeled"):
        rm.train([RelevanceExample("u1", "testo")], spec=HASH)
    with pytest.raises(ValueError, match="empty"):
        rm.train([], spec=HASH)


def test_load_rejects_other_task(tmp_path, ner_fixture):
    from floodtweets import location_model as lm

    lm.save_model(lm.train(ner_fixture, spec=HASH, config=TrainConfig(epochs=1)), tmp_path / "ner")
    with pytest.raises(ValueError, match="LETT"):
        rm.load_model(tmp_path / "ner")


def test_tiny_bert_fine_tunes(tiny_bert_dir, tmp_path):
    spec = EncoderSpec("bert", tiny_bert_dir, max_seq_len=32)
    examples = separable_relevance_fixture(0)
    model = rm.train(examples, spec=spec, config=TrainConfig(learning_rate=1e-2, epochs=15), offline=True)
    assert model.history[-1]["loss"] < 0.5 < model.history[0]["loss"]
    assert accuracy(model, examples) >= 0.95
    rm.save_model(model, tmp_path / "bert")
    back = rm.load_model(tmp_path / "bert")
    texts = [e.text for e in examples[:4]]
    assert rm.predict_proba_batch(back, texts).tolist() == pytest.approx(
        rm.predict_proba_batch(model, texts).tolist(), abs=1e-6
    )
