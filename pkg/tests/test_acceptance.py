"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section at the end of the output.
"""

import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, DEMO
from medlit.captions import CaptionFormat, parse_caption_file, serialize_captions
from medlit.classifier import LogisticKnowledgeClassifier, parse_logistic, serialize_logistic
from medlit.cli import main
from medlit.corpus import load_annotated_corpus, parse_annotations, serialize_annotations, split_dataset
from medlit.embeddings import parse_embeddings, serialize_embeddings, train_embeddings
from medlit.frames import count_medical_objects, parse_frame_predictions, sampling_schedule, serialize_frame_predictions
from medlit.gradcheck import logistic_check, skipgram_check, tagger_suite
from medlit.metrics import class_metrics, cohen_kappa, confusion, f_measure
from medlit.report import render_report
from medlit.tagger import BLSTMTagger, extract_spans, load_tagger, save_tagger
from medlit.metrics import span_f_measure

from synthetic import random_frames, separable_points, template_corpus
from test_metrics import brute_confusion, brute_kappa, brute_prf
from test_report_layout import layout_fixture

GOLDEN = Path(__file__).parent / "golden"


@contextmanager
def criterion(number, title):
    t0 = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException:
        ACCEPTANCE_LINES.append(f"[{number}] FAIL  {title}  {_fmt(detail)}")
        raise
    extra = _fmt(detail)
    ACCEPTANCE_LINES.append(f"[{number}] PASS  {title}  ({time.perf_counter() - t0:.1f} s) {extra}".rstrip())


def _fmt(detail):
    return " ".join(f"{k}={v}" for k, v in detail.items())


def test_1_tagger_gradients():
    with criterion(1, "BLSTM gradients vs finite differences, 20 seeds") as d:
        t0 = time.perf_counter()
        reports = tagger_suite(n_seeds=20)
        elapsed = time.perf_counter() - t0
        worst = max(r.max_rel_error for r in reports)
        d["max_rel_error"] = f"{worst:.2e}"
        assert len(reports) == 20
        assert worst < 1e-4
        assert elapsed < 60


def test_2_embedding_and_classifier_gradients():
    with criterion(2, "skip-gram and logistic gradients vs finite differences") as d:
        t0 = time.perf_counter()
        sg = [skipgram_check(seed=s) for s in range(10)]
        lg = [logistic_check(seed=s) for s in range(10)]
        elapsed = time.perf_counter() - t0
        d["skipgram"] = f"{max(r.max_rel_error for r in sg):.2e}"
        d["logistic"] = f"{max(r.max_rel_error for r in lg):.2e}"
        assert max(r.max_rel_error for r in sg) < 1e-4
        assert max(r.max_rel_error for r in lg) < 1e-6
        assert elapsed < 30


@pytest.mark.slow
def test_3_synthetic_ner():
    with criterion(3, "synthetic NER token F-measure >= 0.95") as d:
        t0 = time.perf_counter()
        X, y = template_corpus(200, seed=0)
        order = np.random.default_rng(0).permutation(200)
        train, test = order[:160], order[160:]
        # unsupervised embeddings may see every sentence; labels only from the training split
        emb = train_embeddings(X, dim=50, epochs=5, seed=0)
        tagger = BLSTMTagger(hidden_size=150, embeddings=emb, epochs=10, learning_rate=0.1, random_state=0)
        tagger.fit([X[i] for i in train], [y[i] for i in train])
        pred = tagger.predict([X[i] for i in test])
        m = span_f_measure([extract_spans(X[i], y[i]) for i in test],
                           [extract_spans(X[i], p) for i, p in zip(test, pred)], mode="token")
        d["f"] = f"{m.f_measure['MT']:.4f}"
        assert m.f_measure["MT"] >= 0.95
        assert time.perf_counter() - t0 < 600


def test_4_separable_classification():
    with criterion(4, "separable set reaches 100% training accuracy in 500 steps") as d:
        X, y = separable_points(40)
        model = LogisticKnowledgeClassifier(epochs=500, l2_lambda=0.0).fit(X, y)
        d["accuracy"] = model.score(X, y)
        assert model.score(X, y) == 1.0


def test_5_metric_oracles():
    with criterion(5, "metrics equal brute-force oracles; reported F-measures reproduce") as d:
        rng = np.random.default_rng(5)
        classes = ("high", "low")
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            g = rng.choice(classes, size=n).tolist()
            p = rng.choice(classes, size=n).tolist()
            m = confusion(g, p, classes)
            assert m.counts.tolist() == brute_confusion(g, p, classes)
            cm = class_metrics(m)
            for c in classes:
                assert (cm.precision[c], cm.recall[c], cm.f_measure[c]) == pytest.approx(brute_prf(g, p, c), abs=1e-12)
            if len(set(g)) == 2 or len(set(p)) == 2:
                assert cohen_kappa(g, p) == pytest.approx(brute_kappa(g, p), abs=1e-12)
        f_high, f_low = f_measure(0.865, 0.805), f_measure(0.838, 0.843)
        d["f"] = f"{f_high:.4f}/{f_low:.4f}"
        assert abs(f_high - 0.834) <= 5e-4
        assert abs(f_low - 0.840) <= 5e-4


@pytest.fixture(scope="module")
def two_demo_runs(tmp_path_factory):
    outs = []
    for name in ("run_a", "run_b"):
        out = tmp_path_factory.mktemp(name)
        assert main(["all", "-c", str(DEMO / "demo.cfg"), "-o", str(out)]) == 0
        outs.append(out)
    return outs


def test_6_determinism(two_demo_runs):
    with criterion(6, "two demo runs are byte-identical") as d:
        a, b = two_demo_runs
        names = ["report.txt", "report.csv", "predictions.csv", "tagger.bin", "classifier.txt", "embeddings.txt",
                 "tagged.tsv", "features.csv", "objects.csv", "split.tsv"]
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        d["files"] = len(names)


def test_7_frame_arithmetic():
    with criterion(7, "frame schedule lengths and threshold monotonicity"):
        for dur in range(10_001):
            assert len(sampling_schedule(dur)) == math.ceil(dur / 2)
        rng = np.random.default_rng(7)
        lexicon = {"syringe", "stethoscope", "pill bottle"}
        for _ in range(500):
            frames = random_frames(rng, n_frames=int(rng.integers(1, 15)))
            thresholds = np.sort(rng.uniform(0, 1, size=4))
            for mode in ("occurrences", "distinct"):
                counts = [count_medical_objects(frames, lexicon, t, mode).medical_object_count for t in thresholds]
                assert counts == sorted(counts, reverse=True)


def test_8_format_fidelity(two_demo_runs):
    with criterion(8, "format round-trips and golden report layout") as d:
        checked = 0
        for path in sorted((DEMO / "captions").iterdir()) + [Path(__file__).parent / "data" / "twelve_cues.srt"]:
            fmt = CaptionFormat.from_path(path)
            cues = parse_caption_file(path.read_text(encoding="utf-8"), fmt)
            raw = serialize_captions(cues, fmt)
            assert parse_caption_file(raw, fmt) == cues
            assert serialize_captions(parse_caption_file(raw, fmt), fmt) == raw
            checked += 1
        for path in (DEMO / "annotations.tsv", DEMO / "rater_b.tsv"):
            rows = parse_annotations(path.read_text(encoding="utf-8"))
            raw = serialize_annotations(rows)
            assert parse_annotations(raw) == rows
            assert serialize_annotations(parse_annotations(raw)) == raw
            checked += 1
        frames = parse_frame_predictions((DEMO / "frames.csv").read_text(encoding="utf-8"))
        raw = serialize_frame_predictions(frames)
        assert parse_frame_predictions(raw) == frames
        assert serialize_frame_predictions(parse_frame_predictions(raw)) == raw
        checked += 1

        run = two_demo_runs[0]
        raw = (run / "embeddings.txt").read_text(encoding="utf-8")
        emb = parse_embeddings(raw)
        assert serialize_embeddings(emb) == raw
        assert np.array_equal(parse_embeddings(serialize_embeddings(emb)).input_vectors, emb.input_vectors)
        raw = (run / "classifier.txt").read_text(encoding="utf-8")
        model, names = parse_logistic(raw)
        assert serialize_logistic(model, names) == raw
        tagger = load_tagger(run / "tagger.bin")
        copy = run.parent / "tagger_copy.bin"
        save_tagger(tagger, copy)
        assert copy.read_bytes() == (run / "tagger.bin").read_bytes()
        checked += 3

        assert render_report(layout_fixture(), [("seed", 0), ("tagger_hidden", 150)]) == (GOLDEN / "table_layout.txt").read_text(encoding="utf-8")
        assert (run / "report.txt").read_text(encoding="utf-8") == \
            (GOLDEN / "demo_report.txt").read_text(encoding="utf-8")
        d["files"] = checked


def test_9_full_scale_split(tmp_path):
    with criterion(9, "600-video manifest splits 480/120 stratified") as d:
        manifest = tmp_path / "metadata.jsonl"
        labels = ["high"] * 377 + ["low"] * 223
        np.random.default_rng(9).shuffle(labels)
        manifest.write_text("".join(
            json.dumps({"video_id": f"yt{i:04d}", "title": "t", "description": "d.", "duration_s": 60,
                        "knowledge_label": lab}) + "\n" for i, lab in enumerate(labels)), encoding="utf-8")
        corpus = load_annotated_corpus(manifest)
        train, test = split_dataset(corpus, train_fraction=0.8, seed=0, stratify=True)
        d["split"] = f"{len(train)}/{len(test)}"
        assert (len(train), len(test)) == (480, 120)
        label = {v.video_id: v.knowledge_label.value for v in corpus.videos}
        train_high = sum(label[v] == "high" for v in train)
        test_high = sum(label[v] == "high" for v in test)
        assert abs(train_high - 377 * 0.8) <= 1 and abs(test_high - 377 * 0.2) <= 1
        assert abs((480 - train_high) - 223 * 0.8) <= 1 and abs((120 - test_high) - 223 * 0.2) <= 1
        assert not set(train) & set(test)
