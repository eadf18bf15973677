"""Logistic regression and linear SVM trained by seeded mini-batch SGD.

Both models minimize a data term averaged over the ``n`` training rows plus
``||w||^2 / (2 C n)``. That is the usual "C times summed loss plus half the
squared norm" objective divided by ``C n``, so a ``C`` tuned for the common
library convention means the same thing here. The bias is not regularized.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .features import FeatureVector, Vocabulary, build_vocabulary, to_matrix, vectorize

__all__ = [
    "DEFAULT_C",
    "DivergenceError",
    "FORMAT_VERSION",
    "LinearModel",
    "ModelKind",
    "TrainConfig",
    "fit_texts",
    "hinge_objective",
    "hinge_subgradient",
    "logistic_gradient",
    "logistic_objective",
    "predict_label",
    "predict_score",
    "train",
    "train_linear_svm",
    "train_logreg",
]

FORMAT_VERSION = 1

LOGREG = "logreg"
LINEAR_SVM = "linear_svm"
ModelKind = str
MODEL_KINDS = (LOGREG, LINEAR_SVM)

# Tuned regularization strengths for the two baselines.
DEFAULT_C = {LOGREG: 4.95, LINEAR_SVM: 4.35}
DEFAULT_THRESHOLD = {LOGREG: 0.5, LINEAR_SVM: 0.0}


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, value: float):
        self.epoch = epoch
        super().__init__(f"objective became non-finite ({value}) at epoch {epoch}")


@dataclass(frozen=True)
class TrainConfig:
    kind: ModelKind = LOGREG
    C: float = 1.0
    epochs: int = 200
    learning_rate: float = 1.0
    lr_decay: float = 0.01
    batch_size: Optional[int] = 16
    seed: int = 42
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.learning_rate > 0 or self.lr_decay < 0:
            raise ValueError("learning_rate must be positive and lr_decay non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 or None for full batch")

    def step_size(self, epoch: int) -> float:
        return self.learning_rate / (1.0 + self.lr_decay * epoch)

    @classmethod
    def for_kind(cls, kind: ModelKind, **overrides) -> TrainConfig:
        overrides.setdefault("C", DEFAULT_C[kind])
        return cls(kind=kind, **overrides)


# -- objectives ---------------------------------------------------------------

Matrix = Union[np.ndarray, sp.spmatrix]


def _margins(w: np.ndarray, b: float, X: Matrix, y: np.ndarray) -> np.ndarray:
    return y * (X @ w + b)


def logistic_objective(w: np.ndarray, b: float, X: Matrix, y: np.ndarray, C: float) -> float:
    n = X.shape[0]
    m = _margins(w, b, X, y)
    return float(np.logaddexp(0.0, -m).mean() + w @ w / (2.0 * C * n))


def logistic_gradient(w: np.ndarray, b: float, X: Matrix, y: np.ndarray, C: float) -> tuple[np.ndarray, float]:
    n = X.shape[0]
    coef = -y * expit(-_margins(w, b, X, y)) / n
    return X.T @ coef + w / (C * n), float(coef.sum())


def hinge_objective(w: np.ndarray, b: float, X: Matrix, y: np.ndarray, C: float) -> float:
    n = X.shape[0]
    m = _margins(w, b, X, y)
    return float(np.maximum(0.0, 1.0 - m).mean() + w @ w / (2.0 * C * n))


def hinge_subgradient(w: np.ndarray, b: float, X: Matrix, y: np.ndarray, C: float) -> tuple[np.ndarray, float]:
    """Subgradient of the hinge objective; rows exactly at margin 1 contribute 0."""
    n = X.shape[0]
    active = _margins(w, b, X, y) < 1.0
    coef = -y * active / n
    return X.T @ coef + w / (C * n), float(coef.sum())


_OBJECTIVES = {
    LOGREG: (logistic_objective, logistic_gradient),
    LINEAR_SVM: (hinge_objective, hinge_subgradient),
}


# -- model --------------------------------------------------------------------

@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    vocabulary: Vocabulary
    kind: ModelKind
    config: TrainConfig
    format_version: int = FORMAT_VERSION
    history: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.vocabulary.size,):
            raise ValueError(f"weights have shape {self.weights.shape}, vocabulary size is {self.vocabulary.size}")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    @property
    def default_threshold(self) -> float:
        return DEFAULT_THRESHOLD[self.kind]

    def decision_function(self, X: Matrix) -> np.ndarray:
        return X @ self.weights + self.bias

    def score_matrix(self, X: Matrix) -> np.ndarray:
        raw = self.decision_function(X)
        return expit(raw) if self.kind == LOGREG else raw

    def score_texts(self, texts: Sequence[str]) -> np.ndarray:
        X = to_matrix((vectorize(t, self.vocabulary) for t in texts), self.vocabulary.size)
        return self.score_matrix(X)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "kind": self.kind,
            "config": asdict(self.config),
            "vocabulary": self.vocabulary.to_dict(),
            "weights": [float(x) for x in self.weights],
            "bias": float(self.bias),
        }

    @classmethod
    def from_dict(cls, data: dict) -> LinearModel:
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version!r}")
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            vocabulary=Vocabulary.from_dict(data["vocabulary"]),
            kind=data["kind"],
            config=TrainConfig(**data["config"]),
        )

    def save(self, path: Union[str, Path]) -> None:
        # json writes floats with repr(), which round-trips exactly.
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> LinearModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- training -----------------------------------------------------------------

def _signed_labels(y: Sequence) -> np.ndarray:
    out = []
    for v in y:
        code = getattr(v, "code", v)
        if code in (1, True):
            out.append(1.0)
        elif code in (0, -1, False):
            out.append(-1.0)
        else:
            raise ValueError(f"unrecognized label {v!r}")
    return np.asarray(out)


def _as_matrix(X: Union[Matrix, Sequence[FeatureVector]], dimension: int) -> sp.csr_matrix:
    if isinstance(X, np.ndarray) or sp.issparse(X):
        M = sp.csr_matrix(X, dtype=np.float64)
    else:
        M = to_matrix(X, dimension)
    if M.shape[1] != dimension:
        raise ValueError(f"feature dimension {M.shape[1]} does not match vocabulary size {dimension}")
    return M


def train(
    X: Union[Matrix, Sequence[FeatureVector]],
    y: Sequence,
    cfg: TrainConfig,
    vocabulary: Vocabulary,
) -> LinearModel:
    """Fit a linear model of ``cfg.kind`` on feature rows ``X``.

    Starts from zero weights and runs mini-batch SGD with step
    ``learning_rate / (1 + lr_decay * epoch)``, reshuffling rows each epoch
    with a generator seeded by ``cfg.seed``. The parameters reported for an
    epoch are the running average of that epoch's iterates, which damps the
    hinge subgradient noise considerably. Stops when the full-data objective
    of that average changes by less than ``tol`` (relative) between epochs,
    or after ``epochs`` passes.
    """
    M = _as_matrix(X, vocabulary.size)
    ys = _signed_labels(y)
    n = M.shape[0]
    if n != len(ys):
        raise ValueError(f"{n} feature rows but {len(ys)} labels")
    if n < 2 or len(np.unique(ys)) < 2:
        raise ValueError("training needs at least two samples covering both classes")

    objective, gradient = _OBJECTIVES[cfg.kind]
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(M.shape[1])
    b = 0.0
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    reg = 1.0 / (cfg.C * n)
    history = [objective(w, b, M, ys, cfg.C)]

    w_avg, b_avg = w, b
    # Overflow shows up as a non-finite objective, reported as DivergenceError.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            eta = cfg.step_size(epoch)
            order = rng.permutation(n) if batch < n else np.arange(n)
            w_avg, b_avg = np.zeros_like(w), 0.0
            for step, start in enumerate(range(0, n, batch), start=1):
                idx = order[start:start + batch]
                # Batch data gradient plus the full-data regularizer share.
                gw, gb = gradient(w, b, M[idx], ys[idx], math.inf)
                w = w - eta * (gw + reg * w)
                b = b - eta * gb
                w_avg += (w - w_avg) / step
                b_avg += (b - b_avg) / step
            value = objective(w_avg, b_avg, M, ys, cfg.C)
            if not math.isfinite(value):
                raise DivergenceError(epoch + 1, value)
            history.append(value)
            prev = history[-2]
            if abs(prev - value) <= cfg.tol * max(abs(prev), 1e-12):
                break

    return LinearModel(weights=w_avg, bias=b_avg, vocabulary=vocabulary, kind=cfg.kind, config=cfg, history=history)


def train_logreg(X, y, cfg: TrainConfig, vocabulary: Vocabulary) -> LinearModel:
    if cfg.kind != LOGREG:
        cfg = TrainConfig(**{**asdict(cfg), "kind": LOGREG})
    return train(X, y, cfg, vocabulary)


def train_linear_svm(X, y, cfg: TrainConfig, vocabulary: Vocabulary) -> LinearModel:
    if cfg.kind != LINEAR_SVM:
        cfg = TrainConfig(**{**asdict(cfg), "kind": LINEAR_SVM})
    return train(X, y, cfg, vocabulary)


def fit_texts(texts: Sequence[str], labels: Sequence, cfg: TrainConfig, min_df: int = 1) -> LinearModel:
    """Build a vocabulary from ``texts`` and train on their count vectors."""
    vocab = build_vocabulary(texts, min_df)
    X = to_matrix((vectorize(t, vocab) for t in texts), vocab.size)
    return train(X, labels, cfg, vocab)


def predict_score(model: LinearModel, text: str) -> float:
    """Sigmoid probability for logistic models, raw decision value for SVMs."""
    return float(model.score_texts([text])[0])


def predict_label(model: LinearModel, text: str, threshold: Optional[float] = None) -> int:
    """1 (dark) when the score reaches ``threshold``, else 0."""
    if threshold is None:
        threshold = model.default_threshold
    return int(predict_score(model, text) >= threshold)
