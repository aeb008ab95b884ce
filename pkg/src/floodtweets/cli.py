"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data or parse error,
3 runtime failure (including checkpoint load errors).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .corpus_io import CorpusError
from .encoder_backend import FAMILIES, EncoderLoadError
from .fixtures import make_fixtures
from .manifests import ManifestError, load_manifest
from .span_eval import MatchMode, OmittedPolicy, format_table, write_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

logger = logging.getLogger("floodtweets")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the manifest seed")
    p.add_argument("--offline", action="store_true", help="never touch the network")
    p.add_argument("--encoder-family", choices=FAMILIES, help="override the manifest encoder family")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floodtweets", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one model from a run manifest")
    p.add_argument("--manifest", required=True, help="manifest file or bundled run name")
    p.add_argument("--data", required=True, help="development corpus (RCTP .tsv or LETT .conll)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--checkpoint", help="pretrained checkpoint id or local directory")
    p.add_argument("--learning-rate", type=float)
    _common(p)

    p = sub.add_parser("predict", help="predict with a trained model")
    p.add_argument("--model", required=True, help="model artifact directory")
    p.add_argument("--data", required=True, help="input corpus")
    p.add_argument("--out", required=True, help="prediction file to write")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("score", help="score a prediction file against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--task", required=True, type=str.upper, choices=("RCTP", "LETT"))
    p.add_argument("--mode", choices=("exact", "partial", "both"), default="both", help="LETT span matching")
    p.add_argument("--policy", choices=[p.value for p in OmittedPolicy],
                   help="LETT omitted-tweet policy (default: count_as_false for exact, ignore for partial)")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("reproduce", help="run every bundled manifest and compare with published scores")
    p.add_argument("--data", help="data directory (rctp/dev.tsv, rctp/test.tsv, lett/dev.conll, lett/test.conll)")
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", action="append", default=[], metavar="FAMILY=ID",
                   help="checkpoint per encoder family, repeatable")
    p.add_argument("--manifest", action="append", default=[], help="restrict to these bundled runs")
    _common(p)

    p = sub.add_parser("make-fixtures", help="write the synthetic offline corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _parse_checkpoints(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        family, sep, ckpt = item.partition("=")
        if not sep or family not in FAMILIES or not ckpt:
            raise UsageError(f"--checkpoint expects FAMILY=ID with FAMILY in {FAMILIES[:4]}, got {item!r}")
        out[family] = ckpt
    return out


def cmd_train(args) -> int:
    manifest = pipeline.effective_manifest(
        load_manifest(args.manifest), args.encoder_family, args.checkpoint, args.seed, args.learning_rate
    )
    model = pipeline.train_command(manifest, args.data, args.out, offline=args.offline)
    last = model.history[-1]
    print(f"trained {manifest.run_name}: {len(model.history)} epochs, final loss {last['loss']:.4f}")
    print(f"model written to {Path(args.out) / 'model'}")
    return EXIT_OK


def cmd_predict(args) -> int:
    n, stats = pipeline.predict_command(args.model, args.data, args.out)
    print(f"wrote {n} predictions to {args.out}")
    print("counters: " + ", ".join(f"{k}={stats.get(k, 0)}" for k in ("truncated", "empty_after_cleaning", "dropped_words")))
    return EXIT_OK


def cmd_score(args) -> int:
    modes = (MatchMode.EXACT, MatchMode.PARTIAL) if args.mode == "both" else (MatchMode(args.mode),)
    rows = pipeline.score_command(args.gold, args.pred, args.task, modes, args.policy)
    print(format_table(rows))
    if args.out:
        write_report(rows, args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    report = pipeline.reproduce(
        args.data,
        args.out,
        offline=args.offline,
        encoder_family=args.encoder_family,
        checkpoints=_parse_checkpoints(args.checkpoint),
        seed=args.seed,
        names=args.manifest or None,
    )
    print((Path(args.out) / "report.md").read_text(encoding="utf-8"))
    print(f"{len(report['runs'])} runs; report written to {Path(args.out) / 'report.json'}")
    return EXIT_OK


def cmd_make_fixtures(args) -> int:
    paths = make_fixtures(args.out, seed=args.seed)
    for p in paths.values():
        print(p)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "score": cmd_score,
    "reproduce": cmd_reproduce,
    "make-fixtures": cmd_make_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ManifestError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, FileNotFoundError, UnicodeDecodeError, json.JSONDecodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except EncoderLoadError as e:
        print(f"load error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        logger.debug("unhandled failure", exc_info=True)
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
