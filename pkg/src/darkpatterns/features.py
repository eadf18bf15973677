"""Bag-of-words tokenization, vocabulary and sparse count vectors."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FeatureVector",
    "TOKENIZER_VERSION",
    "Vocabulary",
    "build_vocabulary",
    "to_matrix",
    "tokenize",
    "vectorize",
]

TOKENIZER_VERSION = "alnum-lower-1"

# Letters and digits (Unicode aware); underscore is a separator.
_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters.

    >>> tokenize("Hurry Up! Only 1 Piece Left")
    ['hurry', 'up', 'only', '1', 'piece', 'left']
    """
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    document_frequency: tuple[int, ...]
    min_df: int = 1
    token_to_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.document_frequency):
            raise ValueError("tokens and document_frequency differ in length")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "token_to_index", index)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    @property
    def config_hash(self) -> str:
        payload = json.dumps({"tokenizer": TOKENIZER_VERSION, "min_df": self.min_df}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "tokenizer": TOKENIZER_VERSION,
            "min_df": self.min_df,
            "config_hash": self.config_hash,
            "tokens": list(self.tokens),
            "document_frequency": list(self.document_frequency),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Vocabulary:
        if data.get("tokenizer", TOKENIZER_VERSION) != TOKENIZER_VERSION:
            raise ValueError(f"unsupported tokenizer {data['tokenizer']!r}")
        return cls(tuple(data["tokens"]), tuple(data["document_frequency"]), int(data.get("min_df", 1)))


def build_vocabulary(corpus: Sequence[str], min_df: int = 1) -> Vocabulary:
    """Index tokens seen in at least ``min_df`` documents, in first-seen order."""
    if len(corpus) == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if min_df < 1:
        raise ValueError("min_df must be at least 1")
    df: Counter[str] = Counter()
    order: dict[str, None] = {}
    for doc in corpus:
        unique = dict.fromkeys(tokenize(doc))
        for tok in unique:
            df[tok] += 1
            order.setdefault(tok)
    kept = [tok for tok in order if df[tok] >= min_df]
    return Vocabulary(tuple(kept), tuple(df[t] for t in kept), min_df)


@dataclass(frozen=True)
class FeatureVector:
    indices: tuple[int, ...]
    counts: tuple[int, ...]
    dimension: int

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.counts):
            raise ValueError("indices and counts differ in length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("indices must be strictly increasing")
        if self.indices and (self.indices[0] < 0 or self.indices[-1] >= self.dimension):
            raise ValueError("index out of range")
        if any(c < 1 for c in self.counts):
            raise ValueError("counts must be positive")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[list(self.indices)] = self.counts
        return out


def vectorize(text: str, vocab: Vocabulary) -> FeatureVector:
    lookup = vocab.token_to_index
    counts = Counter(lookup[t] for t in tokenize(text) if t in lookup)
    indices = tuple(sorted(counts))
    return FeatureVector(indices, tuple(counts[i] for i in indices), vocab.size)


def to_matrix(vectors: Iterable[FeatureVector], dimension: int) -> sp.csr_matrix:
    """Stack feature vectors into a CSR matrix of shape ``(n, dimension)``."""
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for v in vectors:
        if v.dimension != dimension:
            raise ValueError(f"vector dimension {v.dimension} != {dimension}")
        indices.extend(v.indices)
        data.extend(v.counts)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, dimension),
    )
