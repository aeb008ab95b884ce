from __future__ import annotations

import re

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from floodtweets.preprocess import (
    URL_RE,
    CleaningConfig,
    clean_text,
    default_stopwords,
    emoji_pattern,
    load_stopwords,
    stopwords_version,
)

CLEAN = CleaningConfig.clean()
UNCLEAN = CleaningConfig.unclean()
FLOOD_KEYWORDS = {"alluvione", "allagamento", "esondazione"}

# (raw tweet, expected under the clean preset with the bundled stop words)
FIXTURES = [
    ("Alluvione a Milano! https://t.co/abc @rai", "alluvione milano!"),
    ("Esondazione del Seveso https://t.co/x1 http://bit.ly/y2", "esondazione seveso"),
    ("@protezionecivile @comune allerta rossa", "allerta rossa"),
    ("Allagamento in via Roma 🌧️🌊", "allagamento via roma"),
    ("Che disastro 😱😱😱 a Genova", "disastro genova"),
    ("#alluvione #Genova strade chiuse", "alluvione genova strade chiuse"),
    ("www.meteo.it aggiornamenti sulla piena", "aggiornamenti piena"),
    ("Il fiume è esondato nella notte", "fiume esondato notte"),
    ("@rai https://t.co/zz 🙏", ""),
    ("di a da in con su per tra fra", "fra"),
    ("", ""),
    ("   ", ""),
    ("Bandiera 🇮🇹 alluvione", "bandiera alluvione"),
    ("Famiglia 👨‍👩‍👧 evacuata", "famiglia evacuata"),
    ("Pioggia\tforte\nsu Bologna", "pioggia forte bologna"),
    ("HTTPS://T.CO/ABC maiuscolo", "maiuscolo"),
    ("email test@example.com resta", "email test@example.com resta"),
    ("(@sindaco) chiede aiuto", "( ) chiede aiuto"),
    ("##doppio hashtag", "doppio hashtag"),
    ("keycap 1️⃣ numero", "keycap 1 numero"),
    ("Allerta meteo ⚠️ su Firenze, evacuate 20 famiglie", "allerta meteo firenze, evacuate 20 famiglie"),
    ("Piove!!! #allerta@meteo", "piove!!! allerta@meteo"),  # embedded @ is not a mention
]


@pytest.mark.parametrize("raw, expected", FIXTURES)
def test_clean_fixtures(raw, expected):
    assert clean_text(raw, CLEAN) == expected


def test_spec_style_example_with_custom_stopwords():
    # URL -> space, mention -> space, lowercase, drop "a", collapse
    assert clean_text("Alluvione a Milano! https://t.co/abc @rai", CleaningConfig.clean({"a"})) == "alluvione milano!"


@pytest.mark.parametrize("raw, _", FIXTURES)
def test_unclean_is_identity(raw, _):
    assert clean_text(raw, UNCLEAN) == raw


def test_empty_input():
    assert clean_text("", CLEAN) == ""


def test_individual_stages():
    only_urls = CleaningConfig(remove_mentions=False, remove_emojis=False, remove_stopwords=False,
                               strip_hashtags=False, lowercase=False)
    assert clean_text("Vedi https://t.co/a @rai #Po 😱", only_urls) == "Vedi @rai #Po 😱"
    keep_case = CleaningConfig(lowercase=False, stopwords={"di"})
    assert clean_text("Piena di Po", keep_case) == "Piena Po"


def test_default_stopwords():
    words = default_stopwords()
    assert "di" in words
    assert not words & FLOOD_KEYWORDS
    assert all(w == w.lower() and w.strip() == w and w for w in words)
    assert default_stopwords() == words
    words.add("mutated")
    assert "mutated" not in default_stopwords()
    assert stopwords_version() == "it-1.0"


def test_load_stopwords(tmp_path):
    p = tmp_path / "sw.txt"
    p.write_text("# version: x\nIl\nla\n\n", encoding="utf-8")
    assert load_stopwords(p) == {"il", "la"}


def test_stopword_validation():
    with pytest.raises(ValueError):
        CleaningConfig(stopwords={"Di"})
    with pytest.raises(ValueError):
        CleaningConfig(stopwords={"a b"})


def test_config_round_trip():
    assert CleaningConfig.from_dict(CLEAN.to_dict()) == CLEAN
    assert CleaningConfig.from_dict(UNCLEAN.to_dict()) == UNCLEAN
    assert CleaningConfig.preset("clean") == CLEAN
    with pytest.raises(ValueError):
        CleaningConfig.preset("dirty")


def test_emoji_pattern_covers_common_emoji():
    for e in "😀🌊🚗🤔🥲🇮🇹⚠☀✅":
        assert emoji_pattern().search(e), e
    assert not emoji_pattern().search("àèìòù€")


tweetish = st.lists(
    st.one_of(
        st.characters(),
        st.sampled_from(list("@#:/. \t\n")),
        st.sampled_from(["http://", "https://", "www.", "😀", "🇮🇹", "\u200d", "\ufe0f", " di ", " a "]),
    ),
    max_size=30,
).map("".join)


@settings(max_examples=500)
@given(tweetish)
@example("@😀rai")
@example("😀#Genova")
@example("h😀ttps://x")
@example("@0@0")
def test_idempotent(text):
    for config in (CLEAN, UNCLEAN, CleaningConfig.clean({"a"})):
        once = clean_text(text, config)
        assert clean_text(once, config) == once


@settings(max_examples=500)
@given(tweetish)
@example("@0@0")
def test_targeted_patterns_absent(text):
    out = clean_text(text, CLEAN)
    assert not URL_RE.search(out)
    assert not any(re.match(r"@\w", tok) for tok in out.split())
    assert not emoji_pattern().search(out)


@settings(max_examples=300)
@given(tweetish)
def test_no_injected_characters(text):
    out = clean_text(text, CleaningConfig(lowercase=False))
    assert len(out) <= len(text)
    assert set(out) - {" "} <= set(text)
