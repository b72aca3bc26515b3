import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from medlit.classifier import (FeatureMode, FeatureVector, LogisticKnowledgeClassifier, build_features,
                               gradient_check_logistic, load_logistic, log_loss_and_grad, parse_feature_table,
                               parse_logistic, predict_video, save_logistic, serialize_feature_table,
                               serialize_logistic, train_logistic)
from medlit.corpus import KnowledgeLabel, TokenLabel
from medlit.exceptions import ValidationError
from medlit.frames import VideoObjectSummary
from medlit.gradcheck import logistic_check

from synthetic import separable_points

NA, MT = TokenLabel.NA, TokenLabel.MT
HIGH, LOW = KnowledgeLabel.HIGH, KnowledgeLabel.LOW


class _Video:
    def __init__(self, video_id, caption_cues=("cue",)):
        self.video_id = video_id
        self.caption_cues = caption_cues


def test_build_features_examples():
    v = _Video("v")
    assert build_features(v, [[NA, NA]], [[NA]], VideoObjectSummary("v")).as_array().tolist() == [0, 0, 0]
    f = build_features(v, [[NA, MT, MT]], [[MT]], VideoObjectSummary("v", 3, 2))
    assert f.as_array().tolist() == [2, 1, 2]
    assert f.as_array(FeatureMode.COMBINED).tolist() == [3, 2]
    assert f.as_array(FeatureMode.RATES).tolist() == pytest.approx([2 / 3, 1.0, 2.0])
    with pytest.raises(ValidationError):
        build_features(v, object_summary=VideoObjectSummary("w"))


def test_build_features_no_captions_flagged():
    f = build_features(_Video("v", caption_cues=()), [], [[MT, NA]])
    assert not f.has_captions
    assert f.caption_mt_count == 0
    assert f.as_array(FeatureMode.RATES)[0] == 0.0


def test_three_video_feature_table(three_videos):
    from medlit.corpus import load_annotated_corpus
    corpus = load_annotated_corpus(*three_videos)
    table = {}
    for v in corpus.videos:
        sents = [s for s in corpus.annotated if s.video_id == v.video_id]
        cap = [s.gold_labels for s in sents if s.source.value == "cap"]
        desc = [s.gold_labels for s in sents if s.source.value == "desc"]
        table[v.video_id] = build_features(v, cap, desc).as_array()[:2].tolist()
    # counted by hand from tests/data/three_videos/annotations.tsv
    assert table == {"v1": [2, 3], "v2": [0, 1], "v3": [0, 0]}


def test_separable_reaches_full_accuracy():
    X, y = separable_points(40)
    model = LogisticKnowledgeClassifier(epochs=500, l2_lambda=0.0).fit(X, y)
    assert model.score(X, y) == 1.0
    # a held-out point far on the positive side
    w = np.array([1.0, -2.0, 0.5])
    assert model.predict([3 * w])[0] is HIGH
    assert model.predict([-3 * w])[0] is LOW


def test_constant_features_give_prior():
    X = np.ones((10, 3))
    y = [HIGH] * 7 + [LOW] * 3
    with pytest.warns(RuntimeWarning, match="constant"):
        model = LogisticKnowledgeClassifier(epochs=2000, learning_rate=0.5).fit(X, y)
    assert not model.active_.any()
    assert model.predict_proba(X)[:, 1] == pytest.approx(np.full(10, 0.7), abs=1e-3)
    assert all(p is HIGH for p in model.predict(X))


def test_heavy_l2_shrinks_weights():
    X, y = separable_points(40)
    model = LogisticKnowledgeClassifier(epochs=500, l2_lambda=1e6).fit(X, y)
    assert np.abs(model.coef_).max() < 1e-3
    prior = np.mean([lab == "high" for lab in y])
    assert model.predict_proba(X[:1])[0, 1] == pytest.approx(prior, abs=1e-2)


def test_single_class_rejected():
    with pytest.raises(ValidationError, match="single class"):
        LogisticKnowledgeClassifier().fit(np.eye(3), [HIGH] * 3)


def test_loss_never_increases_small_step():
    X, y = separable_points(40, seed=4)
    model = LogisticKnowledgeClassifier(epochs=200, learning_rate=1e-3, l2_lambda=0.1).fit(X, y)
    hist = np.array(model.loss_history_)
    assert np.all(np.diff(hist) <= 1e-15)
    assert hist[-1] <= hist[0]


def test_predict_video_closed_forms():
    zero = LogisticKnowledgeClassifier.from_parameters([0, 0, 0], 0.0)
    pred = predict_video(zero, FeatureVector("v", 5, 1, 9))
    assert pred.probability_high == 0.5
    assert pred.label is HIGH
    assert pred.video_id == "v"
    hand = LogisticKnowledgeClassifier.from_parameters([1, 0, 0], 0.0)
    assert predict_video(hand, [2.0, 7.0, -3.0]).probability_high == pytest.approx(1 / (1 + math.exp(-2)))
    with pytest.raises(ValidationError):
        predict_video(hand, [1.0, 2.0])


def test_gradient_check():
    report = logistic_check()
    assert report.passed and report.max_rel_error < 1e-6
    rng = np.random.default_rng(1)
    for lam in (0.0, 1e-3, 10.0):
        Z = rng.normal(size=(15, 3))
        y = rng.integers(0, 2, size=15)
        assert gradient_check_logistic(rng.normal(size=3), 0.3, Z, y, l2_lambda=lam).max_rel_error < 1e-6
    with pytest.raises(ValidationError):
        gradient_check_logistic(np.zeros(3), 0.0, Z, y, eps=0)


def test_symmetric_batch_zero_gradient():
    Z = np.array([[1.0, 2.0], [-1.0, -2.0], [1.0, 2.0], [-1.0, -2.0]])
    y = np.array([1, 1, 0, 0])
    _, gw, gb = log_loss_and_grad(np.zeros(2), 0.0, Z, y)
    assert np.allclose(gw, 0.0) and gb == 0.0


@given(st.floats(0, 100), st.integers(0, 1000))
def test_l2_term_exact(lam, seed):
    rng = np.random.default_rng(seed)
    Z, y, w = rng.normal(size=(6, 3)), rng.integers(0, 2, size=6), rng.normal(size=3)
    l0, g0, b0 = log_loss_and_grad(w, 0.1, Z, y, 0.0)
    l1, g1, b1 = log_loss_and_grad(w, 0.1, Z, y, lam)
    assert np.allclose(g1 - g0, lam * w, rtol=1e-9, atol=1e-9)
    assert l1 - l0 == pytest.approx(lam / 2 * (w @ w), rel=1e-9, abs=1e-9)
    assert b1 == b0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 100), st.floats(-50, 50))
def test_affine_invariance(seed, a, c):
    X, y = separable_points(30, seed=seed % 50)
    base = LogisticKnowledgeClassifier(epochs=100).fit(X, y).predict(X)
    moved = LogisticKnowledgeClassifier(epochs=100).fit(a * X + c, y).predict(a * X + c)
    assert list(base) == list(moved)


def test_sklearn_api():
    X, y = separable_points(20)
    model = LogisticKnowledgeClassifier(epochs=50)
    assert clone(model).get_params()["epochs"] == 50
    model.fit(X, y)
    assert list(model.classes_) == [LOW, HIGH]
    assert model.predict_proba(X).sum(axis=1) == pytest.approx(np.ones(20))


def test_train_logistic_deterministic():
    feats = [FeatureVector(f"v{i}", i, 2 * i % 5, i % 3) for i in range(12)]
    labels = [HIGH if i > 5 else LOW for i in range(12)]
    a = train_logistic(feats, labels, seed=0)
    b = train_logistic(feats, labels, seed=0)
    assert np.array_equal(a.coef_, b.coef_) and a.intercept_ == b.intercept_


def test_model_file_round_trip(tmp_path):
    X, y = separable_points(40)
    X[:, 2] = 4.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = LogisticKnowledgeClassifier(epochs=50).fit(X, y)
    raw = serialize_logistic(model)
    again, names = parse_logistic(raw)
    assert names == ("cap_mt", "desc_mt", "med_obj")
    assert serialize_logistic(again) == raw
    assert np.array_equal(again.predict_proba(X), model.predict_proba(X))
    save_logistic(model, tmp_path / "m.txt")
    assert serialize_logistic(load_logistic(tmp_path / "m.txt")[0]) == raw


def test_feature_table_round_trip():
    feats = [FeatureVector("a", 1, 2, 3), FeatureVector("b", 0, 0, 0)]
    raw = serialize_feature_table(feats, [HIGH, None])
    f2, l2 = parse_feature_table(raw)
    assert f2 == feats and l2 == [HIGH, None]
    assert serialize_feature_table(f2, l2) == raw


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_probability_open_interval_and_monotone(z1, z2):
    model = LogisticKnowledgeClassifier.from_parameters([1.0], 0.0)
    p1, p2 = model.predict_proba([[z1], [z2]])[:, 1]
    assert 0.0 < p1 < 1.0 and 0.0 < p2 < 1.0
    if z1 <= z2:
        assert p1 <= p2
    assert (model.predict([[z1]])[0] is HIGH) == (p1 >= 0.5)
