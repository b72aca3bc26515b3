"""Staged, reproducible end-to-end runs.

Every stage reads its inputs from the persisted outputs of earlier stages,
so running the stages one at a time produces the same files as ``all``.
"""

import json
import logging
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._io import file_digest, read_text, write_text
from .classifier import (LogisticKnowledgeClassifier, build_features, feature_names, load_logistic,
                         save_logistic, serialize_feature_table)
from .corpus import KnowledgeLabel, Source, load_annotated_corpus, read_annotations, save_corpus, split_dataset
from .embeddings import SkipGramEmbedding, load_embeddings, save_embeddings
from .exceptions import ConfigError, MissingUpstreamError, ValidationError
from .frames import (load_object_lexicon, parse_summaries, read_frame_predictions, serialize_summaries,
                     summarize_videos)
from .metrics import class_metrics, cohen_kappa, confusion, percent_agreement, span_f_measure
from .report import EvaluationResult, KappaResult, render_report, render_table_csv
from .tagger import (BLSTMTagger, extract_spans, lexicon_baseline_tag, load_tagger, load_term_lexicon,
                     parse_tagged, save_tagger, serialize_tagged, tag_corpus_sentences)

logger = logging.getLogger(__name__)

STAGES = ("ingest", "embed", "train-tagger", "tag", "frames", "train-classifier", "evaluate")
REQUIRES = {
    "ingest": (),
    "embed": ("ingest",),
    "train-tagger": ("ingest", "embed"),
    "tag": ("ingest", "train-tagger"),
    "frames": ("ingest",),
    "train-classifier": ("ingest", "tag", "frames"),
    "evaluate": ("ingest", "tag", "frames", "train-classifier"),
}
OUTPUTS = {
    "ingest": ("corpus/metadata.jsonl", "corpus/annotations.tsv", "split.tsv"),
    "embed": ("embeddings.txt",),
    "train-tagger": ("tagger.bin", "tagger_log.tsv"),
    "tag": ("tagged.tsv",),
    "frames": ("objects.csv",),
    "train-classifier": ("features.csv", "classifier.txt"),
    "evaluate": ("report.txt", "report.csv", "predictions.csv"),
}
MANIFEST = "manifest.json"


class Workspace:
    """Helpers for reading and writing stage outputs under ``output_dir``."""

    def __init__(self, config):
        self.config = config
        self.root = Path(config.output_dir)

    def path(self, name):
        return self.root / name

    def check_upstream(self, stage):
        for upstream in REQUIRES[stage]:
            if not all(self.path(f).exists() for f in OUTPUTS[upstream]):
                raise MissingUpstreamError(stage, upstream)

    def corpus(self):
        d = self.path("corpus")
        return load_annotated_corpus(d / "metadata.jsonl", d / "captions", d / "annotations.tsv")

    def split(self):
        train, test = [], []
        for line in read_text(self.path("split.tsv")).splitlines()[1:]:
            vid, part = line.split("\t")
            (train if part == "train" else test).append(vid)
        return train, test

    def tagged(self):
        return parse_tagged(read_text(self.path("tagged.tsv")), path=self.path("tagged.tsv"))

    def summaries(self):
        return parse_summaries(read_text(self.path("objects.csv")), path=self.path("objects.csv"))


# -- stages -----------------------------------------------------------------

def _ingest(ws):
    cfg = ws.config
    if cfg.metadata is None:
        raise ConfigError("ingest needs 'metadata'")
    corpus = load_annotated_corpus(cfg.metadata, cfg.captions_dir, cfg.annotations)
    ws.root.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, ws.path("corpus"))
    train, test = split_dataset(corpus, cfg.train_fraction, cfg.stage_seed("split"), cfg.stratify)
    rows = ["video_id\tpartition"] + [f"{v}\ttrain" for v in train] + [f"{v}\ttest" for v in test]
    write_text(ws.path("split.tsv"), "\n".join(rows) + "\n")
    counts = corpus.label_counts()
    logger.info("ingest: %d videos (%d high / %d low), split %d/%d", len(corpus.videos),
                counts[KnowledgeLabel.HIGH], counts[KnowledgeLabel.LOW], len(train), len(test))


def _embed(ws):
    cfg = ws.config
    corpus = ws.corpus()
    est = SkipGramEmbedding(dim=cfg.emb_dim, window=cfg.emb_window, negatives=cfg.emb_negatives,
                            epochs=cfg.emb_epochs, learning_rate=cfg.emb_learning_rate,
                            max_kept=cfg.max_vocab, random_state=cfg.stage_seed("embed"))
    est.fit([s.tokens for s in corpus.sentences])
    save_embeddings(est.to_model(), ws.path("embeddings.txt"))
    if est.loss_history_:
        logger.info("embed: |V|=%d, loss %.4f -> %.4f", len(est.vocab_), est.loss_history_[0],
                    est.loss_history_[-1])


def _train_tagger(ws):
    cfg = ws.config
    corpus = ws.corpus()
    train_ids = set(ws.split()[0])
    sents = [s for s in corpus.annotated if s.video_id in train_ids]
    if not sents:
        raise ValidationError("no annotated sentences in the training split")
    tagger = BLSTMTagger(hidden_size=cfg.tagger_hidden, embeddings=load_embeddings(ws.path("embeddings.txt")),
                         epochs=cfg.tagger_epochs, learning_rate=cfg.tagger_learning_rate,
                         clip_norm=cfg.tagger_clip_norm, freeze_embeddings=cfg.freeze_embeddings,
                         random_state=cfg.stage_seed("train-tagger"))
    tagger.fit([s.tokens for s in sents], [s.gold_labels for s in sents])
    save_tagger(tagger, ws.path("tagger.bin"))
    log = ["epoch\tmean_loss\ttoken_accuracy"]
    log += [f"{r['epoch']}\t{r['mean_loss']!r}\t{r['token_accuracy']!r}" for r in tagger.log_]
    write_text(ws.path("tagger_log.tsv"), "\n".join(log) + "\n")
    logger.info("train-tagger: %d sentences, loss %.4f -> %.4f", len(sents),
                tagger.log_[0]["mean_loss"], tagger.log_[-1]["mean_loss"])


def _tag(ws):
    corpus = ws.corpus()
    tagger = load_tagger(ws.path("tagger.bin"))
    write_text(ws.path("tagged.tsv"), serialize_tagged(tag_corpus_sentences(tagger, corpus.sentences)))


def _frames(ws):
    cfg = ws.config
    corpus = ws.corpus()
    frames = read_frame_predictions(cfg.frame_predictions) if cfg.frame_predictions else []
    known = {v.video_id for v in corpus.videos}
    unknown = sorted({f.video_id for f in frames} - known)
    if unknown:
        logger.warning("frames: ignoring predictions for %d unknown videos", len(unknown))
        frames = [f for f in frames if f.video_id in known]
    lexicon = load_object_lexicon(cfg.object_lexicon)
    summaries = summarize_videos(frames, [v.video_id for v in corpus.videos], lexicon,
                                 cfg.frame_threshold, cfg.count_mode)
    write_text(ws.path("objects.csv"), serialize_summaries(summaries.values()))


def video_features(ws):
    corpus = ws.corpus()
    summaries = ws.summaries()
    by_video = {}
    for ts in ws.tagged():
        by_video.setdefault(ts.video_id, {Source.CAPTION: [], Source.DESCRIPTION: []})[ts.sentence.source].append(ts)
    feats = {}
    for v in corpus.videos:
        tags = by_video.get(v.video_id, {Source.CAPTION: [], Source.DESCRIPTION: []})
        feats[v.video_id] = build_features(v, tags[Source.CAPTION], tags[Source.DESCRIPTION],
                                           summaries.get(v.video_id))
    return corpus, feats


def _train_classifier(ws):
    cfg = ws.config
    corpus, feats = video_features(ws)
    write_text(ws.path("features.csv"), serialize_feature_table(
        [feats[v.video_id] for v in corpus.videos], [v.knowledge_label for v in corpus.videos]))
    train_ids = set(ws.split()[0])
    train = [v for v in corpus.videos if v.video_id in train_ids and v.knowledge_label is not None]
    X = np.vstack([feats[v.video_id].as_array(cfg.feature_mode) for v in train])
    model = LogisticKnowledgeClassifier(epochs=cfg.clf_epochs, learning_rate=cfg.clf_learning_rate,
                                        l2_lambda=cfg.clf_l2_lambda, threshold=cfg.clf_threshold,
                                        random_state=cfg.stage_seed("train-classifier"))
    model.fit(X, [v.knowledge_label for v in train])
    save_logistic(model, ws.path("classifier.txt"), feature_names(cfg.feature_mode))


def _ner_rows(test_sents, term_lexicon):
    gold = [extract_spans(ts.tokens, ts.sentence.gold_labels) for ts in test_sents]
    lengths = [len(ts.tokens) for ts in test_sents]
    systems = {"BLSTM": [extract_spans(ts.tokens, ts.labels) for ts in test_sents]}
    if term_lexicon is not None:
        systems["Lexicon baseline"] = [
            extract_spans(ts.tokens, lexicon_baseline_tag(term_lexicon, list(ts.tokens))) for ts in test_sents
        ]
    rows = {}
    for name, pred in systems.items():
        rows[f"{name}, token"] = span_f_measure(gold, pred, "token", lengths)
        rows[f"{name}, exact span"] = span_f_measure(gold, pred, "exact_span")
    return rows


def _kappa_rows(corpus, rater_b_path):
    rows = read_annotations(rater_b_path)
    primary = {}
    for s in corpus.annotated:
        for i, lab in enumerate(s.gold_labels):
            primary[(s.video_id, s.source, s.index, i)] = lab
    terms_a, terms_b, vids_a, vids_b = [], [], [], []
    video_labels = {v.video_id: v.knowledge_label for v in corpus.videos}
    for r in rows:
        if r.is_video_label:
            label = video_labels.get(r.video_id)
            if label is not None:
                vids_a.append(label)
                vids_b.append(r.label)
        else:
            key = (r.video_id, r.source, r.sentence_index, r.token_index)
            if key in primary:
                terms_a.append(primary[key])
                terms_b.append(r.label)

    def result(a, b):
        return KappaResult(cohen_kappa(a, b), percent_agreement(a, b), len(a)) if a else None

    return {"Medical terms (tokens)": result(terms_a, terms_b),
            "Knowledge labels (videos)": result(vids_a, vids_b)}


def _evaluate(ws):
    cfg = ws.config
    corpus, feats = video_features(ws)
    model, _ = load_logistic(ws.path("classifier.txt"))
    test_ids = set(ws.split()[1])
    test = [v for v in corpus.videos if v.video_id in test_ids and v.knowledge_label is not None]

    result = EvaluationResult(n_test_videos=len(test))
    pred_rows = ["video_id,probability_high,predicted,gold"]
    if test:
        X = np.vstack([feats[v.video_id].as_array(cfg.feature_mode) for v in test])
        probs = model.predict_proba(X)[:, 1]
        preds = model.predict(X)
        gold = [v.knowledge_label for v in test]
        result.classification = class_metrics(confusion(gold, preds, (KnowledgeLabel.HIGH, KnowledgeLabel.LOW)))
        pred_rows += [f"{v.video_id},{p:.6f},{lab.value},{v.knowledge_label.value}"
                      for v, p, lab in zip(test, probs, preds)]

    test_sents = [ts for ts in ws.tagged() if ts.video_id in test_ids and ts.sentence.gold_labels is not None]
    result.n_ner_sentences = len(test_sents)
    result.n_ner_tokens = sum(len(ts.tokens) for ts in test_sents)
    if test_sents:
        lexicon = load_term_lexicon(cfg.term_lexicon) if cfg.term_lexicon else None
        result.ner = _ner_rows(test_sents, lexicon)
    if cfg.rater_b_annotations:
        result.kappa = _kappa_rows(corpus, cfg.rater_b_annotations)

    echo = sorted(cfg.hyperparameters().items())
    echo += [(k, Path(v).name) for k, v in sorted(cfg.as_dict().items())
             if k not in ("output_dir",) and k not in cfg.hyperparameters() and v is not None]
    write_text(ws.path("report.txt"), render_report(result, echo))
    write_text(ws.path("report.csv"), render_table_csv(result.classification))
    write_text(ws.path("predictions.csv"), "\n".join(pred_rows) + "\n")
    return result


RUNNERS = {
    "ingest": _ingest,
    "embed": _embed,
    "train-tagger": _train_tagger,
    "tag": _tag,
    "frames": _frames,
    "train-classifier": _train_classifier,
    "evaluate": _evaluate,
}


# -- manifest ---------------------------------------------------------------

def _input_digests(cfg):
    out = {}
    for key in ("metadata", "annotations", "frame_predictions", "object_lexicon", "term_lexicon",
                "rater_b_annotations"):
        path = getattr(cfg, key)
        if path is not None and Path(path).is_file():
            out[key] = file_digest(path)
    if cfg.captions_dir is not None and Path(cfg.captions_dir).is_dir():
        for p in sorted(Path(cfg.captions_dir).iterdir()):
            if p.is_file():
                out[f"captions/{p.name}"] = file_digest(p)
    return out


def _stage_outputs(ws, stage):
    names = list(OUTPUTS[stage])
    if stage == "ingest":
        cap = ws.path("corpus/captions")
        names += [f"corpus/captions/{p.name}" for p in sorted(cap.iterdir())] if cap.is_dir() else []
    return {n: file_digest(ws.path(n)) for n in names}


def load_manifest(output_dir):
    path = Path(output_dir) / MANIFEST
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return None


def run_stage(config, stage):
    """Run one stage (or ``"all"``) and return the updated run manifest as a dict."""
    stages = STAGES if stage == "all" else (stage,)
    if stage != "all" and stage not in RUNNERS:
        raise ConfigError(f"unknown stage {stage!r}")
    ws = Workspace(config)
    if stage != "all":
        ws.check_upstream(stage)
    ws.root.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(ws.root) or {"stages": {}}
    manifest.update(artifact_version=__version__, config=config.as_dict(), inputs=_input_digests(config))
    for name in stages:
        t0 = time.perf_counter()
        RUNNERS[name](ws)
        manifest["stages"][name] = {
            "outputs": _stage_outputs(ws, name),
            "seconds": round(time.perf_counter() - t0, 3),
        }
        write_text(ws.path(MANIFEST), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
