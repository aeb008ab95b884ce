"""Frozen run configurations and their (de)serialization.

A manifest is a JSON document with ``schema_version`` 1.  Unknown keys are
rejected so that a typo can never silently fall back to a default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .encoder_backend import FAMILIES
from .training import TrainConfig

SCHEMA_VERSION = 1
TASKS = ("RCTP", "LETT")
PRESETS = ("clean", "unclean")
DEV_RATIOS = (0.70, 0.20, 0.10)

_TOP_KEYS = {"schema_version", "run_name", "task", "encoder", "cleaning", "train", "split", "seed", "published"}
_ENCODER_KEYS = {"family", "checkpoint_id", "max_seq_len"}
_TRAIN_KEYS = {"batch_size", "epochs", "learning_rate", "beta1", "beta2", "eps", "threshold"}
_PUBLISHED_KEYS = {"source", "rows"}
_ROW_KEYS = {"mode", "precision", "recall", "f1"}
ROW_MODES = ("positive_class", "exact", "partial")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class PublishedRow:
    mode: str
    f1: float
    precision: float | None = None
    recall: float | None = None


@dataclass(frozen=True)
class RunManifest:
    run_name: str
    task: str
    family: str
    checkpoint_id: str | None = None
    max_seq_len: int = 128
    cleaning: str = "unclean"
    train: TrainConfig = field(default_factory=TrainConfig)
    split: tuple[float, float, float] | None = None  # None: train on the full development set
    seed: int = 42
    published_source: str | None = None
    published: tuple[PublishedRow, ...] = ()

    def __post_init__(self):
        if not self.run_name:
            raise ManifestError("run_name must be non-empty")
        if self.task not in TASKS:
            raise ManifestError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.family not in FAMILIES:
            raise ManifestError(f"encoder family must be one of {FAMILIES}, got {self.family!r}")
        if self.cleaning not in PRESETS:
            raise ManifestError(f"cleaning must be one of {PRESETS}, got {self.cleaning!r}")
        if self.task == "LETT" and self.cleaning != "unclean":
            raise ManifestError(f"{self.run_name}: LETT runs use no text cleaning (cleaning must be 'unclean')")
        if self.split is not None:
            if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
                raise ManifestError(f"{self.run_name}: split ratios must be three numbers summing to 1")
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))

    @property
    def evaluates_on(self) -> str:
        return "test" if self.split is None else "dev-holdout"

    def to_dict(self) -> dict:
        train = self.train.to_dict()
        train.pop("seed")
        d = {
            "schema_version": SCHEMA_VERSION,
            "run_name": self.run_name,
            "task": self.task,
            "encoder": {"family": self.family, "checkpoint_id": self.checkpoint_id, "max_seq_len": self.max_seq_len},
            "cleaning": self.cleaning,
            "train": train,
            "split": "full" if self.split is None else {"ratios": list(self.split)},
            "seed": self.seed,
        }
        if self.published:
            d["published"] = {
                "source": self.published_source,
                "rows": [
                    {k: v for k, v in (("mode", r.mode), ("precision", r.precision), ("recall", r.recall), ("f1", r.f1)) if v is not None}
                    for r in self.published
                ],
            }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        _check_keys(d, _TOP_KEYS, "manifest")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ManifestError(f"unsupported schema_version {d.get('schema_version')!r} (expected {SCHEMA_VERSION})")
        for key in ("run_name", "task", "encoder", "train", "split", "seed"):
            if key not in d:
                raise ManifestError(f"manifest is missing required key {key!r}")
        enc = d["encoder"]
        _check_keys(enc, _ENCODER_KEYS, "encoder")
        _check_keys(d["train"], _TRAIN_KEYS, "train")
        split = d["split"]
        if split == "full":
            ratios = None
        elif isinstance(split, dict) and set(split) == {"ratios"}:
            ratios = tuple(float(r) for r in split["ratios"])
        else:
            raise ManifestError(f"split must be 'full' or {{'ratios': [...]}}, got {split!r}")
        published, source = (), None
        if "published" in d:
            pub = d["published"]
            _check_keys(pub, _PUBLISHED_KEYS, "published")
            source = pub.get("source")
            rows = []
            for row in pub.get("rows", []):
                _check_keys(row, _ROW_KEYS, "published row")
                if row.get("mode") not in ROW_MODES:
                    raise ManifestError(f"published row mode must be one of {ROW_MODES}")
                rows.append(PublishedRow(row["mode"], row["f1"], row.get("precision"), row.get("recall")))
            published = tuple(rows)
        try:
            train = TrainConfig(**d["train"], seed=int(d["seed"]))
        except (TypeError, ValueError) as e:
            raise ManifestError(f"invalid train section: {e}") from None
        return cls(
            run_name=d["run_name"],
            task=d["task"],
            family=enc.get("family"),
            checkpoint_id=enc.get("checkpoint_id"),
            max_seq_len=int(enc.get("max_seq_len", 128)),
            cleaning=d.get("cleaning", "unclean"),
            train=train,
            split=ratios,
            seed=int(d["seed"]),
            published_source=source,
            published=published,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ManifestError(f"manifest is not valid JSON: {e}") from None
        return cls.from_dict(data)


def _check_keys(d, allowed: set[str], where: str) -> None:
    if not isinstance(d, dict):
        raise ManifestError(f"{where} must be a JSON object")
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ManifestError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def bundled_names() -> list[str]:
    folder = resources.files("floodtweets.run_manifests")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> RunManifest:
    path = resources.files("floodtweets.run_manifests").joinpath(f"{name}.json")
    if not path.is_file():
        raise ManifestError(f"no bundled manifest named {name!r}; available: {', '.join(bundled_names())}")
    return RunManifest.from_json(path.read_text(encoding="utf-8"))


def load_manifest(name_or_path: str | Path) -> RunManifest:
    """Load a manifest from a file path, or by bundled name."""
    path = Path(name_or_path)
    if path.is_file():
        return RunManifest.from_json(path.read_text(encoding="utf-8"))
    return load_bundled(str(name_or_path))


# -- the bundled run set ----------------------------------------------------------

def _rows(*rows: tuple) -> tuple[PublishedRow, ...]:
    return tuple(PublishedRow(mode, f1, p, r) for mode, p, r, f1 in rows)


def _rctp_test(n: int, family: str, cleaning: str, p: float, r: float, f1: float) -> RunManifest:
    return RunManifest(
        run_name=f"rctp-run{n}-{family}-{cleaning}",
        task="RCTP",
        family=family,
        cleaning=cleaning,
        published_source=f"MediaEval 2022 DisasterMM, RCTP official test results, run {n}",
        published=_rows(("positive_class", p, r, f1)),
    )


def _rctp_dev(family: str, cleaning: str, f1: float) -> RunManifest:
    return RunManifest(
        run_name=f"rctp-dev-{family}-{cleaning}",
        task="RCTP",
        family=family,
        cleaning=cleaning,
        split=DEV_RATIOS,
        published_source=f"MediaEval 2022 DisasterMM, RCTP development-set F1 ({family}, {cleaning})",
        published=_rows(("positive_class", None, None, f1)),
    )


def _lett_test(n: int, family: str, exact: tuple, partial: tuple) -> RunManifest:
    return RunManifest(
        run_name=f"lett-run{n}-{family}",
        task="LETT",
        family=family,
        published_source=f"MediaEval 2022 DisasterMM, LETT official test results, run {n}",
        published=_rows(("exact", *exact), ("partial", *partial)),
    )


def _lett_dev(family: str, f1: float) -> RunManifest:
    return RunManifest(
        run_name=f"lett-dev-{family}",
        task="LETT",
        family=family,
        split=DEV_RATIOS,
        published_source=f"MediaEval 2022 DisasterMM, LETT development-set F1 ({family})",
        published=_rows(("exact", None, None, f1)),
    )


def published_runs() -> list[RunManifest]:
    """Every submitted run and development-set ablation, with published scores."""
    runs = [
        _rctp_test(1, "bert", "unclean", 0.6949, 0.9251, 0.7934),
        _rctp_test(2, "roberta", "unclean", 0.6947, 0.9347, 0.7970),
        _rctp_test(3, "bert", "clean", 0.6486, 0.9213, 0.7613),
        _rctp_test(4, "distilbert", "unclean", 0.6940, 0.9232, 0.7924),
    ]
    dev_f1 = {
        "bert": (0.95, 0.94),
        "roberta": (0.94, 0.93),
        "distilbert": (0.93, 0.93),
        "albert": (0.92, 0.92),
    }
    for family, (clean, unclean) in dev_f1.items():
        runs.append(_rctp_dev(family, "clean", clean))
        runs.append(_rctp_dev(family, "unclean", unclean))
    runs += [
        _lett_test(1, "bert", (0.596, 0.522, 0.556), (0.628, 0.622, 0.625)),
        _lett_test(2, "roberta", (0.540, 0.676, 0.600), (0.577, 0.810, 0.674)),
        _lett_test(3, "distilbert", (0.563, 0.604, 0.583), (0.610, 0.760, 0.677)),
    ]
    for family, f1 in (("bert", 0.7752), ("roberta", 0.8014), ("distilbert", 0.7658), ("albert", 0.6827)):
        runs.append(_lett_dev(family, f1))
    return runs


def write_bundled(directory: str | Path) -> list[Path]:
    """Regenerate the bundled manifest files (used when the run set changes)."""
    directory = Path(directory)
    paths = []
    for m in published_runs():
        path = directory / f"{m.run_name}.json"
        path.write_text(m.to_json(), encoding="utf-8")
        paths.append(path)
    return paths
