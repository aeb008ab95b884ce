from __future__ import annotations

import random

import pytest

from floodtweets.corpus_io import RelevanceExample, TokenAnnotatedTweet

FILLER = (
    "pioggia strada oggi domani città fiume ponte acqua vento sole mare treno "
    "scuola festa calcio cena notizia gente"
).split()
NER_FILLER = "allerta pioggia forte oggi fiume esondato strade allagate vicino alla stazione centrale chiusa".split()

TINY_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "geno", "##va", "al", "##luvione", "esondazione", "a", "milano", "roma", "allerta",
    "pioggia", "oggi", "strade", "allagate", "flood", "!", ",", "il", "po",
]


def separable_relevance_fixture(seed: int = 0) -> list[RelevanceExample]:
    """32 tweets; the 16 containing 'flood' are relevant."""
    rng = random.Random(seed)
    out = []
    for i in range(32):
        words = rng.sample(FILLER, rng.randint(4, 8))
        label = int(i % 2 == 0)
        if label:
            words.insert(rng.randint(0, len(words)), "flood")
        out.append(RelevanceExample(f"r{i}", " ".join(words), label))
    return out


def separable_ner_fixture(seed: int = 0) -> list[TokenAnnotatedTweet]:
    """16 tweets where 'Genova' is always B-LOC and every other word is O."""
    rng = random.Random(seed)
    out = []
    for i in range(16):
        words = rng.sample(NER_FILLER, rng.randint(4, 8))
        words.insert(rng.randint(0, len(words)), "Genova")
        tags = ["B-LOC" if w == "Genova" else "O" for w in words]
        out.append(TokenAnnotatedTweet(f"n{i}", words, tags))
    return out


@pytest.fixture
def relevance_fixture():
    return separable_relevance_fixture()


@pytest.fixture
def ner_fixture():
    return separable_ner_fixture()


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory):
    """A randomly initialised two-layer BERT saved locally, so the transformers path runs offline."""
    transformers = pytest.importorskip("transformers")
    d = tmp_path_factory.mktemp("tiny_bert")
    tok = transformers.BertTokenizer(vocab={w: i for i, w in enumerate(TINY_VOCAB)})
    config = transformers.BertConfig(
        vocab_size=len(TINY_VOCAB), hidden_size=16, num_hidden_layers=2, num_attention_heads=2,
        intermediate_size=32, max_position_embeddings=64,
    )
    transformers.set_seed(0)
    transformers.BertModel(config).save_pretrained(d)
    tok.save_pretrained(d)
    return str(d)
