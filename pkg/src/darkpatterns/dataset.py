"""Build the labeled dark / non-dark text dataset.

Positives come from the dark-pattern records (``Pattern String`` column),
negatives from segmented page texts that do not contain any positive once
digits, case and punctuation are ignored.
"""

from __future__ import annotations

import csv
import io
import random
import string
import unicodedata
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

from .dom import SegmentedText

__all__ = [
    "DATASET_FIELDS",
    "Dataset",
    "DatasetImbalanceWarning",
    "EmptyClassError",
    "InsufficientCandidatesError",
    "Label",
    "NormalizedKey",
    "PatternRecord",
    "SchemaError",
    "TextSample",
    "build_dataset",
    "filter_non_dark",
    "load_pattern_records",
    "normalize_for_match",
    "read_dataset",
    "sample_negatives",
    "write_dataset",
    "write_review_list",
]


class Label(str, Enum):
    DARK = "dark"
    NON_DARK = "non_dark"

    @property
    def code(self) -> int:
        return 1 if self is Label.DARK else 0

    @classmethod
    def parse(cls, value: Union[str, int, "Label"]) -> "Label":
        if isinstance(value, Label):
            return value
        v = str(value).strip().lower()
        if v in {"1", "dark", "true", "positive"}:
            return cls.DARK
        if v in {"0", "non_dark", "non-dark", "false", "negative"}:
            return cls.NON_DARK
        raise ValueError(f"unrecognized label: {value!r}")


class SchemaError(ValueError):
    """Input table is missing a required column."""


class InsufficientCandidatesError(ValueError):
    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"asked for {requested} negatives but only {available} candidates are available")


class EmptyClassError(ValueError):
    """One side of the dataset has no samples."""


class DatasetImbalanceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PatternRecord:
    pattern_string: Optional[str]
    comment: Optional[str] = None
    pattern_category: Optional[str] = None
    pattern_type: Optional[str] = None
    page_location: Optional[str] = None
    deceptive: Optional[bool] = None
    website_page: Optional[str] = None


@dataclass(frozen=True)
class TextSample:
    text: str
    label: Label
    source_url: str = ""
    pattern_category: Optional[str] = None
    pattern_type: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("sample text is empty")


@dataclass(frozen=True)
class NormalizedKey:
    key: str

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class Dataset:
    samples: tuple[TextSample, ...]

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.samples]

    @property
    def labels(self) -> list[int]:
        return [s.label.code for s in self.samples]

    def count(self, label: Label) -> int:
        return sum(1 for s in self.samples if s.label is label)


# -- normalization ------------------------------------------------------------

_ASCII_PUNCT = frozenset(string.punctuation)


def _is_dropped(ch: str) -> bool:
    if ch in _ASCII_PUNCT:
        return True
    cat = unicodedata.category(ch)
    return cat == "Nd" or cat[0] == "P"


def normalize_for_match(text: str) -> NormalizedKey:
    """Key used to compare texts while ignoring numbers, case and punctuation.

    >>> normalize_for_match("Hurry Up! Only 1 Piece Left").key
    'hurry up only piece left'
    """
    folded = text.casefold()
    kept = "".join(ch for ch in folded if not _is_dropped(ch))
    return NormalizedKey(" ".join(kept.split()))


# -- positives ----------------------------------------------------------------

# Accepted header spellings, compared after lowercasing and stripping.
_RECORD_COLUMNS = {
    "pattern_string": ("pattern string", "pattern_string"),
    "comment": ("comment", "comments"),
    "pattern_category": ("pattern category", "pattern_category"),
    "pattern_type": ("pattern type", "pattern_type"),
    "page_location": ("where on the website?", "where in website?", "where on website?", "page_location"),
    "deceptive": ("deceptive?", "deceptive"),
    "website_page": ("website page", "website_page", "url"),
}


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if header_line.count("\t") > header_line.count(",") else ","


def _open_table(source: Union[str, Path, TextIO]) -> csv.DictReader:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8-sig")
    else:
        text = source.read()
    first = text.split("\n", 1)[0]
    if not first.strip():
        raise SchemaError("missing header row")
    return csv.DictReader(io.StringIO(text, newline=""), delimiter=_sniff_delimiter(first))


def _parse_flag(value: Optional[str]) -> Optional[bool]:
    if value is None:
        return None
    v = value.strip().lower()
    if v in {"yes", "true", "1", "y"}:
        return True
    if v in {"no", "false", "0", "n"}:
        return False
    return None


def _clean(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    value = value.strip()
    return value or None


def load_pattern_records(source: Union[str, Path, TextIO]) -> list[PatternRecord]:
    """Read dark-pattern records, dropping empty and duplicate pattern strings.

    Duplicates are exact matches after trimming; the first occurrence wins.
    Tab- or comma-separated input is accepted.
    """
    reader = _open_table(source)
    header = {(name or "").strip().lower(): name for name in reader.fieldnames or ()}
    columns: dict[str, Optional[str]] = {}
    for field_name, aliases in _RECORD_COLUMNS.items():
        columns[field_name] = next((header[a] for a in aliases if a in header), None)
    if columns["pattern_string"] is None:
        raise SchemaError(f"no 'Pattern String' column in header {reader.fieldnames}")

    records: list[PatternRecord] = []
    seen: set[str] = set()
    for row in reader:
        def get(name: str) -> Optional[str]:
            col = columns[name]
            return row.get(col) if col is not None else None

        pattern = _clean(get("pattern_string"))
        if pattern is None or pattern in seen:
            continue
        seen.add(pattern)
        records.append(PatternRecord(
            pattern_string=pattern,
            comment=_clean(get("comment")),
            pattern_category=_clean(get("pattern_category")),
            pattern_type=_clean(get("pattern_type")),
            page_location=_clean(get("page_location")),
            deceptive=_parse_flag(get("deceptive")),
            website_page=_clean(get("website_page")),
        ))
    return records


# -- negatives ----------------------------------------------------------------

def filter_non_dark(candidates: Sequence[SegmentedText], positives: Sequence[PatternRecord]) -> list[SegmentedText]:
    """Drop candidates containing any positive text, then dedupe by key.

    Positives whose key is empty (e.g. a bare price) would match every
    candidate, so they are left out of the filter.
    """
    positive_keys = sorted({
        k for k in (normalize_for_match(p.pattern_string or "").key for p in positives) if k
    })
    kept: list[SegmentedText] = []
    seen: set[str] = set()
    for cand in candidates:
        key = normalize_for_match(cand.text).key
        if key in seen:
            continue
        if any(pk in key for pk in positive_keys):
            continue
        seen.add(key)
        kept.append(cand)
    return kept


def sample_negatives(candidates: Sequence[SegmentedText], n: int, seed: int) -> list[TextSample]:
    """Uniformly pick ``n`` candidates without replacement.

    The result is the first ``n`` items of a ``random.Random(seed)`` shuffle,
    so a larger ``n`` with the same seed extends a smaller sample.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > len(candidates):
        raise InsufficientCandidatesError(n, len(candidates))
    order = list(range(len(candidates)))
    random.Random(seed).shuffle(order)
    return [
        TextSample(text=candidates[i].text, label=Label.NON_DARK, source_url=candidates[i].source_url)
        for i in order[:n]
    ]


def build_dataset(positives: Sequence[PatternRecord], negatives: Sequence[TextSample]) -> Dataset:
    if not positives:
        raise EmptyClassError("no positive (dark) samples")
    if not negatives:
        raise EmptyClassError("no negative (non-dark) samples")
    if len(positives) != len(negatives):
        warnings.warn(
            f"dataset is unbalanced: {len(positives)} dark vs {len(negatives)} non-dark",
            DatasetImbalanceWarning,
            stacklevel=2,
        )
    dark = [
        TextSample(
            text=p.pattern_string or "",
            label=Label.DARK,
            source_url=p.website_page or "",
            pattern_category=p.pattern_category,
            pattern_type=p.pattern_type,
        )
        for p in positives
    ]
    non_dark = [
        TextSample(n.text, Label.NON_DARK, n.source_url, n.pattern_category, n.pattern_type) for n in negatives
    ]
    return Dataset(tuple(dark + non_dark))


# -- file formats -------------------------------------------------------------

DATASET_FIELDS = ("text", "label", "source_url", "pattern_category", "pattern_type")


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_FIELDS)
        for s in dataset.samples:
            writer.writerow([s.text, s.label.code, s.source_url, s.pattern_category or "", s.pattern_type or ""])


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Load a labeled dataset file.

    Reads this package's CSV layout as well as tab-separated files that use
    ``page_id`` / ``Pattern Category`` style column names. Only ``text`` and
    ``label`` are required; rows with blank text are skipped.
    """
    reader = _open_table(path)
    header = {(name or "").strip().lower(): name for name in reader.fieldnames or ()}
    if "text" not in header or "label" not in header:
        raise SchemaError(f"dataset needs 'text' and 'label' columns, got {reader.fieldnames}")

    def col(*names: str) -> Optional[str]:
        return next((header[n] for n in names if n in header), None)

    url_col = col("source_url", "website page", "url", "page_id")
    cat_col = col("pattern_category", "pattern category")
    type_col = col("pattern_type", "pattern type")
    samples = []
    for row in reader:
        text = row[header["text"]]
        if text is None or not text.strip():
            continue
        samples.append(TextSample(
            text=text,
            label=Label.parse(row[header["label"]]),
            source_url=(row.get(url_col) or "") if url_col else "",
            pattern_category=_clean(row.get(cat_col)) if cat_col else None,
            pattern_type=_clean(row.get(type_col)) if type_col else None,
        ))
    return Dataset(tuple(samples))


def write_review_list(samples: Iterable[SegmentedText], path: Union[str, Path]) -> None:
    """Write filtered negatives for manual review, one per row with its key."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("text", "normalized_key", "source_url"))
        for s in samples:
            writer.writerow((s.text, normalize_for_match(s.text).key, s.source_url))
