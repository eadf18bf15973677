"""Stratified k-fold cross-validation and binary classification metrics."""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .classifiers import LINEAR_SVM, LinearModel, TrainConfig, train
from .dataset import Dataset
from .features import Vocabulary, build_vocabulary, to_matrix, vectorize

__all__ = [
    "EvalReport",
    "FoldAssignment",
    "FoldResult",
    "METRIC_NAMES",
    "PipelineConfig",
    "compute_auc",
    "compute_metrics",
    "cross_validate",
    "format_table",
    "stratified_kfold",
]

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    folds: tuple[int, ...]
    seed: int

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.folds) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.folds) if f != fold]

    def sizes(self) -> list[int]:
        return [self.folds.count(f) for f in range(self.k)]


def _labels_of(data: Union[Dataset, Sequence[int]]) -> list[int]:
    return list(data.labels) if isinstance(data, Dataset) else [int(v) for v in data]


def stratified_kfold(data: Union[Dataset, Sequence[int]], k: int = 5, seed: int = 42) -> FoldAssignment:
    """Assign every sample to one of ``k`` folds, preserving class balance.

    Each class is shuffled with a seeded generator, the shuffled classes are
    concatenated (in sorted label order) and position ``i`` goes to fold
    ``i % k``. Carrying the round-robin across classes keeps both per-class
    and total fold sizes within one of each other.
    """
    labels = _labels_of(data)
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    order: list[int] = []
    for label in sorted(set(labels)):
        members = [i for i, v in enumerate(labels) if v == label]
        if len(members) < k:
            raise ValueError(f"class {label} has {len(members)} samples, fewer than k={k}")
        order.extend(members[j] for j in rng.permutation(len(members)))
    folds = [0] * len(labels)
    for pos, i in enumerate(order):
        folds[i] = pos % k
    return FoldAssignment(k=k, folds=tuple(folds), seed=seed)


def compute_metrics(scores: Sequence[float], labels: Sequence[int], threshold: float) -> dict[str, float]:
    """Accuracy, precision, recall and F1 with label 1 (dark) as positive.

    Undefined ratios (no predicted or no actual positives) are reported as 0.
    """
    if len(scores) != len(labels) or not scores:
        raise ValueError("scores and labels must be non-empty and the same length")
    tp = fp = fn = tn = 0
    for s, y in zip(scores, labels):
        pred = s >= threshold
        if y:
            tp += pred
            fn += not pred
        else:
            fp += pred
            tn += not pred
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "accuracy": (tp + tn) / len(labels),
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def compute_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """ROC AUC from the Mann-Whitney rank sum, tied scores sharing their mean rank."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative samples")
    order = np.argsort(s, kind="mergesort")
    sorted_scores = s[order]
    ranks = np.empty(len(s))
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # 1-based ranks i+1..j+1 share their mean.
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    rank_sum = ranks[y].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass(frozen=True)
class PipelineConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    k: int = 5
    seed: int = 42
    min_df: int = 1
    threshold: Optional[float] = None


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    vocabulary_size: int
    metrics: dict[str, float]


@dataclass
class EvalReport:
    model: str
    folds: list[FoldResult]
    mean: dict[str, float]
    pooled: dict[str, float]
    n_samples: int
    class_counts: dict[str, int]
    config: dict
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


FoldHook = Callable[[int, list[int], list[int], Vocabulary, LinearModel], None]


def cross_validate(
    dataset: Dataset,
    config: PipelineConfig = PipelineConfig(),
    on_fold: Optional[FoldHook] = None,
) -> EvalReport:
    """Run k-fold CV: per fold, build the vocabulary on the training split,
    train, score the held-out split and compute metrics.

    ``on_fold`` is called after each fold with the fold number, train and
    test indices, the fold vocabulary and the trained model.
    """
    texts = dataset.texts
    labels = dataset.labels
    assignment = stratified_kfold(labels, config.k, config.seed)
    threshold = config.threshold
    if threshold is None:
        threshold = 0.0 if config.train.kind == LINEAR_SVM else 0.5

    results: list[FoldResult] = []
    all_scores: list[float] = []
    all_labels: list[int] = []
    for fold in range(config.k):
        train_idx = assignment.train_indices(fold)
        test_idx = assignment.test_indices(fold)
        vocab = build_vocabulary([texts[i] for i in train_idx], config.min_df)
        X_train = to_matrix((vectorize(texts[i], vocab) for i in train_idx), vocab.size)
        model = train(X_train, [labels[i] for i in train_idx], config.train, vocab)
        X_test = to_matrix((vectorize(texts[i], vocab) for i in test_idx), vocab.size)
        scores = model.score_matrix(X_test).tolist()
        y_test = [labels[i] for i in test_idx]
        metrics = compute_metrics(scores, y_test, threshold)
        metrics["auc"] = compute_auc(scores, y_test)
        results.append(FoldResult(fold, len(train_idx), len(test_idx), vocab.size, metrics))
        all_scores.extend(scores)
        all_labels.extend(y_test)
        if on_fold is not None:
            on_fold(fold, train_idx, test_idx, vocab, model)

    mean = {name: statistics.fmean(r.metrics[name] for r in results) for name in METRIC_NAMES}
    pooled = compute_metrics(all_scores, all_labels, threshold)
    pooled["auc"] = compute_auc(all_scores, all_labels)
    notes = []
    if config.train.kind == LINEAR_SVM:
        notes.append("SVM uses a linear kernel; the tuned reference configuration used an RBF kernel.")
    return EvalReport(
        model=config.train.kind,
        folds=results,
        mean=mean,
        pooled=pooled,
        n_samples=len(labels),
        class_counts={"dark": sum(labels), "non_dark": len(labels) - sum(labels)},
        config={
            "train": asdict(config.train),
            "k": config.k,
            "seed": config.seed,
            "min_df": config.min_df,
            "threshold": threshold,
        },
        notes=notes,
    )


_TABLE_COLUMNS = (("Accuracy", "accuracy"), ("AUC", "auc"), ("F1 score", "f1"), ("Precision", "precision"), ("Recall", "recall"))
_MODEL_NAMES = {"logreg": "Logistic Regression", "linear_svm": "SVM (linear)"}


def format_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table of mean fold metrics, one row per model."""
    name_width = max([len("Model")] + [len(_MODEL_NAMES.get(r.model, r.model)) for r in reports])
    header = "Model".ljust(name_width) + "".join(f"  {title:>9}" for title, _ in _TABLE_COLUMNS)
    lines = [header, "-" * len(header)]
    for r in reports:
        row = _MODEL_NAMES.get(r.model, r.model).ljust(name_width)
        row += "".join(f"  {r.mean[key]:>9.3f}" for _, key in _TABLE_COLUMNS)
        lines.append(row)
    for r in reports:
        lines.extend(f"note: {n}" for n in r.notes)
    return "\n".join(lines)

