"""Command-line interface: segment, build-dataset, train, evaluate, predict.

Every option can also come from a TOML config file (``--config``); values
given on the command line win over the file, which wins over defaults.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .classifiers import DEFAULT_C, MODEL_KINDS, LinearModel, TrainConfig, fit_texts
from .dataset import (
    EmptyClassError,
    InsufficientCandidatesError,
    SchemaError,
    build_dataset,
    filter_non_dark,
    load_pattern_records,
    read_dataset,
    sample_negatives,
    write_dataset,
    write_review_list,
)
from .dom import DecodeError, SegmentedText, TagPolicy, parse_document, segment_document
from .evaluation import PipelineConfig, cross_validate, format_table

log = logging.getLogger("darkpatterns")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

HTML_SUFFIXES = {".html", ".htm", ".xhtml"}

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "k": 5,
    "min_df": 1,
    "epochs": TrainConfig.epochs,
    "learning_rate": TrainConfig.learning_rate,
    "lr_decay": TrainConfig.lr_decay,
    "batch_size": TrainConfig.batch_size,
    "tol": TrainConfig.tol,
    "out": "-",
}

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"kind", "C", "seed"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


# -- config -------------------------------------------------------------------

class Settings:
    """Resolved option lookup: command line, then config file, then defaults."""

    def __init__(self, args: argparse.Namespace, file_values: dict[str, Any]):
        self._args = vars(args)
        self._file = file_values

    def get(self, key: str, default: Any = None) -> Any:
        value = self._args.get(key)
        if value is not None:
            return value
        if key in self._file:
            return self._file[key]
        return DEFAULTS.get(key, default)

    def require(self, key: str) -> Any:
        value = self.get(key)
        if value is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')} (or '{key}' in the config file)")
        return value

    def path(self, key: str, must_exist: bool = True) -> Path:
        p = Path(self.require(key))
        if must_exist and not p.exists():
            raise DataError(f"{key} path does not exist: {p}")
        return p

    def policy(self) -> TagPolicy:
        table = self._file.get("policy", {})
        if not isinstance(table, dict):
            raise UsageError("'policy' in the config file must be a table")
        unknown = set(table) - {"ignore", "block", "inline"}
        if unknown:
            raise UsageError(f"unknown policy keys: {sorted(unknown)}")
        overrides = {k: set(v) for k, v in table.items()}
        try:
            return TagPolicy().with_overrides(**overrides)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def train_config(self, kind: str) -> TrainConfig:
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
        values = {key: self.get(key) for key in _TRAIN_KEYS}
        c = self._args.get("C")
        if c is None:
            c_table = self._file.get("C")
            c = c_table.get(kind) if isinstance(c_table, dict) else c_table
        try:
            return TrainConfig(kind=kind, C=DEFAULT_C[kind] if c is None else float(c), seed=int(self.get("seed")), **values)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid training options: {exc}") from exc

    def kinds(self) -> list[str]:
        kinds = self.get("kind")
        if kinds is None:
            return list(MODEL_KINDS)
        return [kinds] if isinstance(kinds, str) else list(kinds)


def load_config(path: Optional[str]) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in data.items()}


# -- helpers ------------------------------------------------------------------

def iter_pages(pages_dir: Path) -> list[Path]:
    return sorted(p for p in pages_dir.rglob("*") if p.is_file() and p.suffix.lower() in HTML_SUFFIXES)


def segment_pages(pages_dir: Path, policy: TagPolicy, encoding: Optional[str] = None) -> tuple[list[SegmentedText], int, int]:
    """Segment every HTML file under ``pages_dir``.

    Returns the units plus the number of pages seen and pages that failed.
    A page's ``source_url`` is its path relative to ``pages_dir``.
    """
    units: list[SegmentedText] = []
    pages = iter_pages(pages_dir)
    failed = 0
    for page in pages:
        rel = page.relative_to(pages_dir).as_posix()
        try:
            tree = parse_document(page.read_bytes(), encoding)
            page_units = segment_document(tree, policy, rel)
        except (OSError, DecodeError, RecursionError) as exc:
            log.warning("skipping %s: %s", rel, exc)
            failed += 1
            continue
        log.info("%s: %d units", rel, len(page_units))
        units.extend(page_units)
    return units, len(pages), failed


def read_segments(path: Path) -> list[SegmentedText]:
    units = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                units.append(SegmentedText(rec["text"], rec.get("source_url", ""), list(rec.get("node_path", []))))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad segment record: {exc}") from exc
    return units


class _Output:
    def __init__(self, target: str):
        self.target = target

    def __enter__(self):
        if self.target == "-":
            return sys.stdout
        self._fh = open(self.target, "w", encoding="utf-8", newline="\n")
        return self._fh

    def __exit__(self, *exc):
        if self.target != "-":
            self._fh.close()


def _load_dataset(settings: Settings):
    path = settings.path("dataset")
    try:
        dataset = read_dataset(path)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    log.info("loaded %d samples (%d dark)", len(dataset), sum(dataset.labels))
    return dataset


# -- commands -----------------------------------------------------------------

def cmd_segment(settings: Settings) -> int:
    pages_dir = settings.path("pages")
    units, n_pages, failed = segment_pages(pages_dir, settings.policy(), settings.get("encoding"))
    if n_pages == 0:
        log.warning("no HTML files found in %s", pages_dir)
    with _Output(settings.get("out")) as out:
        for unit in units:
            out.write(json.dumps(unit.to_record(), ensure_ascii=False) + "\n")
    log.info("%d units from %d pages (%d failed)", len(units), n_pages - failed, failed)
    if n_pages and failed == n_pages:
        log.error("every page failed to parse")
        return EXIT_DATA
    return EXIT_OK


def cmd_build_dataset(settings: Settings) -> int:
    out = settings.require("out")
    if out == "-":
        raise UsageError("build-dataset needs --out FILE")
    if settings.get("dataset") is not None:
        dataset = _load_dataset(settings)
        write_dataset(dataset, out)
        return EXIT_OK

    try:
        positives = load_pattern_records(settings.path("positives"))
    except csv.Error as exc:
        raise DataError(f"cannot read positives: {exc}") from exc
    log.info("%d positives after dropping empty and duplicate pattern strings", len(positives))
    if settings.get("segments") is not None:
        candidates = read_segments(settings.path("segments"))
    else:
        candidates, n_pages, failed = segment_pages(settings.path("pages"), settings.policy(), settings.get("encoding"))
        log.info("%d candidate units from %d pages", len(candidates), n_pages - failed)
    negatives_pool = filter_non_dark(candidates, positives)
    log.info("%d candidates left after removing dark-pattern matches and duplicates", len(negatives_pool))
    review = settings.get("review_out")
    if review:
        write_review_list(negatives_pool, review)

    n = settings.get("n")
    n = len(positives) if n is None else int(n)
    negatives = sample_negatives(negatives_pool, n, int(settings.get("seed")))
    dataset = build_dataset(positives, negatives)
    write_dataset(dataset, out)
    log.info("wrote %d samples to %s", len(dataset), out)
    return EXIT_OK


def cmd_train(settings: Settings) -> int:
    out = settings.get("model") or settings.get("out")
    if out in (None, "-"):
        raise UsageError("train needs --out FILE (or --model FILE)")
    kinds = settings.kinds() if settings.get("kind") is not None else ["logreg"]
    if len(kinds) != 1:
        raise UsageError("train takes exactly one --kind")
    dataset = _load_dataset(settings)
    cfg = settings.train_config(kinds[0])
    model = fit_texts(dataset.texts, dataset.labels, cfg, int(settings.get("min_df")))
    model.save(out)
    log.info("trained %s (C=%g) over %d tokens in %d epochs -> %s",
             cfg.kind, cfg.C, model.vocabulary.size, len(model.history) - 1, out)
    return EXIT_OK


def cmd_evaluate(settings: Settings) -> int:
    dataset = _load_dataset(settings)
    threshold = settings.get("threshold")
    reports = []
    for kind in settings.kinds():
        config = PipelineConfig(
            train=settings.train_config(kind),
            k=int(settings.get("k")),
            seed=int(settings.get("seed")),
            min_df=int(settings.get("min_df")),
            threshold=None if threshold is None else float(threshold),
        )
        try:
            reports.append(cross_validate(dataset, config))
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    print(format_table(reports))
    report_path = settings.get("report") or settings.get("out")
    if report_path and report_path != "-":
        Path(report_path).write_text(
            json.dumps({"reports": [r.to_dict() for r in reports]}, indent=2) + "\n", encoding="utf-8"
        )
        log.info("report written to %s", report_path)
    return EXIT_OK


def _input_lines(paths: Sequence[str]) -> Iterator[str]:
    if not paths:
        yield from sys.stdin
        return
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            yield from fh


def cmd_predict(settings: Settings) -> int:
    model_path = settings.path("model")
    try:
        model = LinearModel.load(model_path)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot load model {model_path}: {exc}") from exc
    threshold = settings.get("threshold")
    threshold = model.default_threshold if threshold is None else float(threshold)
    with _Output(settings.get("out")) as out:
        for lineno, line in enumerate(_input_lines(settings.get("inputs") or []), 1):
            text = line.rstrip("\r\n")
            if not text.strip():
                log.warning("line %d is empty, skipped", lineno)
                continue
            score = float(model.score_texts([text])[0])
            out.write(f"{int(score >= threshold)}\t{score:.6f}\t{text}\n")
    return EXIT_OK


COMMANDS = {
    "segment": cmd_segment,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
}


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file with default option values")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file ('-' for stdout where supported)")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")

    def policy_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--pages", help="directory of HTML snapshots")
        p.add_argument("--encoding", help="encoding to assume when a page has no BOM")

    def train_args(p: argparse.ArgumentParser, multi: bool) -> None:
        p.add_argument("--dataset", help="labeled dataset file (CSV or TSV)")
        if multi:
            p.add_argument("--kind", action="append", choices=MODEL_KINDS, help="model kind; repeat for several")
        else:
            p.add_argument("--kind", choices=MODEL_KINDS)
        p.add_argument("--C", dest="C", type=float, help="inverse regularization strength")
        p.add_argument("--epochs", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--lr-decay", dest="lr_decay", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--min-df", dest="min_df", type=int)

    parser = _Parser(
        prog="darkpatterns",
        description="Segment shop pages, build a dark-pattern dataset, and train, evaluate and apply text classifiers.",
        epilog="Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("segment", parents=[common], help="segment HTML pages into text units (JSON lines)")
    policy_args(p)

    p = sub.add_parser("build-dataset", parents=[common], help="assemble the labeled dataset")
    policy_args(p)
    p.add_argument("--positives", help="dark-pattern records (CSV/TSV with a 'Pattern String' column)")
    p.add_argument("--segments", help="JSON-lines output of 'segment' to use instead of --pages")
    p.add_argument("--dataset", help="existing labeled dataset to convert instead of building one")
    p.add_argument("--n", type=int, help="number of negatives (default: number of positives)")
    p.add_argument("--review-out", dest="review_out", help="write filtered candidates here for manual review")

    p = sub.add_parser("train", parents=[common], help="train one model on the whole dataset")
    train_args(p, multi=False)
    p.add_argument("--model", help="where to write the model (same as --out)")

    p = sub.add_parser("evaluate", parents=[common], help="k-fold cross-validation")
    train_args(p, multi=True)
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--report", help="JSON report path (same as --out)")

    p = sub.add_parser("predict", parents=[common], help="label texts, one per line")
    p.add_argument("--model", help="model file from 'train'")
    p.add_argument("--threshold", type=float)
    p.add_argument("inputs", nargs="*", help="text files (default: stdin)")
    return parser


_handler: Optional[logging.Handler] = None


def _configure_logging(level: int) -> None:
    """Send package logs and Python warnings to stderr without touching the root logger."""
    global _handler
    logging.captureWarnings(True)
    for name in ("darkpatterns", "py.warnings"):
        logger = logging.getLogger(name)
        if _handler is not None:
            logger.removeHandler(_handler)
        logger.setLevel(level)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    for name in ("darkpatterns", "py.warnings"):
        logging.getLogger(name).addHandler(_handler)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    _configure_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)

    try:
        settings = Settings(args, load_config(args.config))
        return COMMANDS[args.command](settings)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, OSError, SchemaError, DecodeError, InsufficientCandidatesError, EmptyClassError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
