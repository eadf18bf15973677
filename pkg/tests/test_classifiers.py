from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.linear_model import LogisticRegression

from darkpatterns.classifiers import (
    DEFAULT_C,
    DivergenceError,
    LinearModel,
    TrainConfig,
    fit_texts,
    hinge_objective,
    hinge_subgradient,
    logistic_gradient,
    logistic_objective,
    predict_label,
    predict_score,
    train,
    train_linear_svm,
    train_logreg,
)
from darkpatterns.features import Vocabulary, build_vocabulary

from conftest import make_text_dataset

TOY_VOCAB = Vocabulary(("x0", "x1"), (1, 1))
TOY_X = np.array([[1.0, 0.0], [0.0, 1.0]])
TOY_Y = [1, 0]


def numeric_grad(f, w, b, h=1e-5):
    gw = np.zeros_like(w)
    for j in range(len(w)):
        e = np.zeros_like(w)
        e[j] = h
        gw[j] = (f(w + e, b) - f(w - e, b)) / (2 * h)
    gb = (f(w, b + h) - f(w, b - h)) / (2 * h)
    return gw, gb


def random_problem(seed=0, n=20, d=30):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.choice([-1.0, 1.0], size=n)
    return rng, X, y


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_logistic_gradient_matches_finite_differences(seed):
    rng, X, y = random_problem(seed)
    w, b, C = rng.normal(size=30) * 0.3, float(rng.normal()), 2.5
    gw, gb = logistic_gradient(w, b, X, y, C)
    nw, nb = numeric_grad(lambda w_, b_: logistic_objective(w_, b_, X, y, C), w, b)
    assert rel_err(np.append(gw, gb), np.append(nw, nb)) < 1e-5
    assert max(np.max(np.abs(gw - nw)), abs(gb - nb)) < 1e-5


@pytest.mark.parametrize("seed", range(10))
def test_hinge_subgradient_matches_finite_differences_away_from_kinks(seed):
    rng, X, y = random_problem(seed)
    C = 2.5
    while True:
        w, b = rng.normal(size=30) * 0.3, float(rng.normal())
        margins = y * (X @ w + b)
        # Central differences move a margin by at most h * (|x|_1 + 1).
        if np.min(np.abs(margins - 1.0)) > 1e-5 * (np.abs(X).sum(axis=1).max() + 1) * 10:
            break
    gw, gb = hinge_subgradient(w, b, X, y, C)
    nw, nb = numeric_grad(lambda w_, b_: hinge_objective(w_, b_, X, y, C), w, b)
    assert rel_err(np.append(gw, gb), np.append(nw, nb)) < 1e-5


def test_objectives_accept_sparse_input():
    rng, X, y = random_problem(3)
    w, b = rng.normal(size=30), 0.1
    for f in (logistic_objective, hinge_objective):
        assert f(w, b, sp.csr_matrix(X), y, 1.0) == pytest.approx(f(w, b, X, y, 1.0), rel=1e-12)


@pytest.mark.parametrize("trainer", [train_logreg, train_linear_svm])
def test_separable_toy_set(trainer):
    model = trainer(TOY_X, TOY_Y, TrainConfig(C=10.0), TOY_VOCAB)
    raw = model.decision_function(TOY_X)
    assert raw[0] > 0 > raw[1]


def test_svm_toy_margins_satisfied():
    model = train_linear_svm(TOY_X, TOY_Y, TrainConfig(C=10.0), TOY_VOCAB)
    y = np.array([1.0, -1.0])
    assert np.sum(y * model.decision_function(TOY_X) < 0) == 0


def test_svm_objective_non_increasing_with_decaying_step():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(1.0, 1.0, size=(15, 3)), rng.normal(-1.0, 1.0, size=(15, 3))])
    y = [1] * 15 + [0] * 15
    vocab = Vocabulary(("a", "b", "c"), (1, 1, 1))
    cfg = TrainConfig(kind="linear_svm", C=1.0, epochs=100, learning_rate=0.05, lr_decay=0.1, batch_size=None, tol=1e-12)
    history = train(X, y, cfg, vocab).history
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert history[-1] < history[0]


def test_training_is_bit_identical_for_same_seed():
    rows = make_text_dataset(60)
    texts, labels = [t for t, _ in rows], [y for _, y in rows]
    for kind in ("logreg", "linear_svm"):
        cfg = TrainConfig(kind=kind, C=DEFAULT_C[kind], epochs=20)
        a = fit_texts(texts, labels, cfg)
        b = fit_texts(texts, labels, cfg)
        assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias
        c = fit_texts(texts, labels, TrainConfig(kind=kind, C=DEFAULT_C[kind], epochs=20, seed=7))
        assert c.weights.tobytes() != a.weights.tobytes()


@pytest.mark.parametrize("kind", ["logreg", "linear_svm"])
def test_weight_norm_shrinks_as_c_decreases(kind):
    rng = np.random.default_rng(4)
    X = rng.normal(size=(80, 6))
    y = (X[:, 0] + 0.8 * rng.normal(size=80) > 0).astype(int)
    vocab = Vocabulary(tuple("abcdef"), (1,) * 6)
    norms = []
    for C in (10.0, 1.0, 0.1):
        cfg = TrainConfig(kind=kind, C=C, epochs=400, learning_rate=0.2, lr_decay=0.05, tol=1e-10)
        norms.append(np.linalg.norm(train(X, y, cfg, vocab).weights))
    assert norms[0] >= norms[1] >= norms[2]


def test_logreg_reaches_reference_optimum():
    # Same objective as scikit-learn's L2 logistic regression up to a 1/(Cn) factor.
    rows = make_text_dataset(120, seed=5)
    texts, labels = [t for t, _ in rows], [y for _, y in rows]
    flips = np.random.default_rng(0).random(len(labels)) < 0.1
    labels = [1 - y if f else y for y, f in zip(labels, flips)]
    C = DEFAULT_C["logreg"]
    model = fit_texts(texts, labels, TrainConfig(C=C))
    from darkpatterns.features import to_matrix, vectorize

    X = to_matrix((vectorize(t, model.vocabulary) for t in texts), model.vocabulary.size)
    ys = np.where(np.array(labels) == 1, 1.0, -1.0)
    ref = LogisticRegression(C=C, tol=1e-10, max_iter=10_000).fit(X, labels)
    ours = logistic_objective(model.weights, model.bias, X, ys, C)
    best = logistic_objective(ref.coef_[0], ref.intercept_[0], X, ys, C)
    assert ours == pytest.approx(best, rel=0.02)
    agree = np.mean((model.decision_function(X) > 0) == (ref.decision_function(X) > 0))
    assert agree >= 0.97


class TestTrainErrors:
    def test_single_class(self):
        with pytest.raises(ValueError, match="both classes"):
            train(TOY_X, [1, 1], TrainConfig(), TOY_VOCAB)

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            train(TOY_X[:1], [1], TrainConfig(), TOY_VOCAB)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            train(TOY_X, [1, 0, 1], TrainConfig(), TOY_VOCAB)

    def test_divergence_names_epoch(self):
        X = np.array([[1e200, 0.0], [0.0, 1e200]])
        with pytest.raises(DivergenceError) as info:
            train(X, [1, 0], TrainConfig(learning_rate=1e200, batch_size=None), TOY_VOCAB)
        assert info.value.epoch == 1

    @pytest.mark.parametrize(
        "kwargs", [{"C": 0.0}, {"C": -1.0}, {"epochs": 0}, {"tol": 0.0}, {"kind": "rbf"}, {"batch_size": 0}]
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


def hand_model(kind, weights, bias):
    vocab = Vocabulary(("only", "left", "hurry"), (1, 1, 1))
    return LinearModel(np.array(weights, dtype=float), bias, vocab, kind, TrainConfig(kind=kind))


class TestPredict:
    def test_zero_logreg(self):
        assert predict_score(hand_model("logreg", [0, 0, 0], 0.0), "anything") == 0.5

    def test_zero_svm(self):
        assert predict_score(hand_model("linear_svm", [0, 0, 0], 0.0), "anything") == 0.0

    def test_hand_computed_dot_product(self):
        m = hand_model("linear_svm", [0.5, 1.25, -2.0], 0.1)
        # only x2, left x1, hurry x1, "3" out of vocabulary.
        assert predict_score(m, "Hurry! Only 3 left, only today") == pytest.approx(2 * 0.5 + 1.25 - 2.0 + 0.1)
        lm = hand_model("logreg", [0.5, 1.25, -2.0], 0.1)
        assert predict_score(lm, "only left") == pytest.approx(1 / (1 + math.exp(-1.85)))

    def test_all_oov_is_bias_only(self):
        assert predict_score(hand_model("linear_svm", [1, 1, 1], -0.3), "zzz") == pytest.approx(-0.3)

    def test_labels_and_tie_rule(self):
        m = hand_model("linear_svm", [0.7, 0, 0], 0.0)
        assert predict_label(m, "only", 0.5) == 1
        assert predict_label(m, "only", 0.7) == 1
        assert predict_label(m, "only", 0.7000001) == 0
        assert predict_label(m, "zzz") == 1  # score 0.0 at default threshold 0.0
        lm = hand_model("logreg", [0, 0, 0], 0.0)
        assert predict_label(lm, "x") == 1  # 0.5 >= 0.5


def test_serialization_round_trip_is_exact(tmp_path):
    rows = make_text_dataset(40)
    for kind in ("logreg", "linear_svm"):
        model = fit_texts([t for t, _ in rows], [y for _, y in rows], TrainConfig(kind=kind, epochs=15))
        path = tmp_path / f"{kind}.json"
        model.save(path)
        loaded = LinearModel.load(path)
        probe = [t for t, _ in rows] + ["unseen words only", ""]
        np.testing.assert_array_equal(model.score_texts(probe), loaded.score_texts(probe))
        assert loaded.config == model.config
        assert loaded.vocabulary == model.vocabulary
        save_again = tmp_path / "again.json"
        loaded.save(save_again)
        assert save_again.read_bytes() == path.read_bytes()


def test_model_rejects_bad_parameters():
    vocab = build_vocabulary(["a b"])
    with pytest.raises(ValueError):
        LinearModel(np.zeros(3), 0.0, vocab, "logreg", TrainConfig())
    with pytest.raises(ValueError):
        LinearModel(np.array([np.nan, 0.0]), 0.0, vocab, "logreg", TrainConfig())


def test_unknown_format_version():
    model = hand_model("logreg", [0, 0, 0], 0.0)
    data = model.to_dict()
    data["format_version"] = 99
    with pytest.raises(ValueError, match="format version"):
        LinearModel.from_dict(data)
