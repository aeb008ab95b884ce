"""Deterministic synthetic Italian-flavoured corpora for offline runs.

The real benchmark data cannot be redistributed, so ``make-fixtures`` writes
small corpora in the same layout ``reproduce`` expects::

    <dir>/rctp/dev.tsv    <dir>/rctp/test.tsv
    <dir>/lett/dev.conll  <dir>/lett/test.conll
"""
from __future__ import annotations

import random
from pathlib import Path

from .corpus_io import RelevanceExample, TokenAnnotatedTweet, write_lett, write_rctp

RCTP_DEV = Path("rctp/dev.tsv")
RCTP_TEST = Path("rctp/test.tsv")
LETT_DEV = Path("lett/dev.conll")
LETT_TEST = Path("lett/test.conll")

PLACES = [
    ["Genova"], ["Milano"], ["Venezia"], ["Palermo"], ["Bologna"], ["Firenze"], ["Modena"],
    ["Reggio", "Emilia"], ["La", "Spezia"], ["Ascoli", "Piceno"], ["Val", "di", "Susa"],
]
RIVERS = ["Po", "Arno", "Tevere", "Seveso", "Bisagno", "Secchia"]
MENTIONS = ["@protezionecivile", "@rainews", "@comune", "@meteo_it"]
EMOJI = ["🌧️", "⚠️", "😱", "🌊", "🙏", "☀️", "😂", "⚽"]

RELEVANT = [
    "Alluvione a {place}: strade allagate e scuole chiuse {url}",
    "{mention} esondazione del {river} vicino a {place}, evacuate {n} famiglie {emoji}",
    "Allagamento in centro a {place} dopo la pioggia di stanotte #allerta {emoji}",
    "Il {river} è esondato, a {place} acqua nelle case {url}",
    "#alluvione {place}: sottopassi allagati, chiusa la statale {mention}",
    "Allerta rossa a {place} per rischio esondazione del {river} {emoji}",
]
IRRELEVANT = [
    "Che bella giornata a {place} oggi {emoji}",
    "Un'alluvione di gol allo stadio di {place} {emoji} {url}",
    "{mention} stasera concerto in piazza a {place}, ci vediamo lì",
    "Allagamento di emozioni per la finale di ieri {emoji}",
    "Nuovo ristorante aperto a {place}, consigliatissimo {url}",
    "Traffico in tangenziale a {place} come ogni lunedì {mention}",
]
LETT_TEMPLATES = [
    "esondazione del fiume {river} a {place} , strade chiuse",
    "allerta meteo su {place} per le prossime ore",
    "acqua alta a {place} , ponte chiuso e negozi allagati",
    "evacuate le famiglie vicino al {river} tra {place} e {place2}",
    "nessun danno segnalato per ora",
    "situazione critica a {place} dopo il nubifragio",
    "frana sulla strada per {place} , traffico bloccato",
]


def _fill(template: str, rng: random.Random) -> str:
    return template.format(
        place=" ".join(rng.choice(PLACES)),
        river=rng.choice(RIVERS),
        mention=rng.choice(MENTIONS),
        emoji=rng.choice(EMOJI),
        url=f"https://t.co/{rng.randrange(16**6):06x}",
        n=rng.randint(2, 90),
    )


def rctp_corpus(n: int, rng: random.Random, prefix: str) -> list[RelevanceExample]:
    out = []
    for i in range(n):
        label = int(rng.random() < 0.5)
        text = _fill(rng.choice(RELEVANT if label else IRRELEVANT), rng)
        out.append(RelevanceExample(f"{prefix}{i:04d}", text, label))
    return out


def lett_corpus(n: int, rng: random.Random, prefix: str) -> list[TokenAnnotatedTweet]:
    out = []
    for i in range(n):
        template = rng.choice(LETT_TEMPLATES)
        words, tags = [], []
        for slot in template.split():
            if slot in ("{place}", "{place2}"):
                place = rng.choice(PLACES)
                words += place
                tags += ["B-LOC"] + ["I-LOC"] * (len(place) - 1)
            elif slot == "{river}":
                words.append(rng.choice(RIVERS))
                tags.append("O")
            else:
                words.append(slot)
                tags.append("O")
        out.append(TokenAnnotatedTweet(f"{prefix}{i:04d}", words, tags))
    return out


def make_fixtures(directory, seed: int = 7, n_dev: int = 80, n_test: int = 20) -> dict[str, Path]:
    directory = Path(directory)
    rng = random.Random(seed)
    paths = {
        "rctp_dev": directory / RCTP_DEV,
        "rctp_test": directory / RCTP_TEST,
        "lett_dev": directory / LETT_DEV,
        "lett_test": directory / LETT_TEST,
    }
    for p in paths.values():
        p.parent.mkdir(parents=True, exist_ok=True)
    write_rctp(rctp_corpus(n_dev, rng, "rd"), paths["rctp_dev"])
    write_rctp(rctp_corpus(n_test, rng, "rt"), paths["rctp_test"])
    write_lett(lett_corpus(n_dev, rng, "ld"), paths["lett_dev"])
    write_lett(lett_corpus(n_test, rng, "lt"), paths["lett_test"])
    return paths
