"""Canonical in-memory corpus: videos, sentences, token annotations, splits."""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._io import read_text, write_text
from .captions import CaptionFormat, cue_document, read_caption_file, serialize_captions
from .exceptions import ParseError, ValidationError
from .text import split_sentences, tokenize

logger = logging.getLogger(__name__)


class TokenLabel(str, Enum):
    NA = "NA"
    MT = "MT"


class KnowledgeLabel(str, Enum):
    HIGH = "high"
    LOW = "low"


class Source(str, Enum):
    DESCRIPTION = "desc"
    CAPTION = "cap"


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    title: str = ""
    description: str = ""
    duration_s: int = 0
    channel: str = ""
    knowledge_label: KnowledgeLabel | None = None
    caption_cues: tuple = ()
    caption_format: CaptionFormat | None = None

    def __post_init__(self):
        if not self.video_id:
            raise ValidationError("empty video_id")
        if self.duration_s < 0:
            raise ValidationError(f"{self.video_id}: negative duration_s")
        starts = [c.start_ms for c in self.caption_cues]
        if starts != sorted(starts):
            raise ValidationError(f"{self.video_id}: caption cues not ordered by start time")


@dataclass(frozen=True)
class Sentence:
    video_id: str
    source: Source
    index: int
    tokens: tuple
    gold_labels: tuple | None = None

    def __post_init__(self):
        if not self.tokens:
            raise ValidationError(f"{self.video_id}: empty sentence")
        if self.gold_labels is not None and len(self.gold_labels) != len(self.tokens):
            raise ValidationError(
                f"{self.video_id}/{self.source.value}/{self.index}: "
                f"{len(self.gold_labels)} labels for {len(self.tokens)} tokens"
            )

    @property
    def key(self):
        return (self.video_id, self.source, self.index)


@dataclass(frozen=True)
class Corpus:
    videos: tuple
    sentences: tuple
    annotated_subset: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        ids = [v.video_id for v in self.videos]
        dupes = [k for k, n in Counter(ids).items() if n > 1]
        if dupes:
            raise ValidationError(f"duplicate video_id: {dupes[0]}")
        for i in self.annotated_subset:
            if not 0 <= i < len(self.sentences) or self.sentences[i].gold_labels is None:
                raise ValidationError(f"annotated index {i} has no gold labels")

    def video(self, video_id):
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    @property
    def annotated(self):
        return [self.sentences[i] for i in sorted(self.annotated_subset)]

    def label_counts(self):
        counts = Counter(v.knowledge_label for v in self.videos if v.knowledge_label is not None)
        return {lab: counts.get(lab, 0) for lab in KnowledgeLabel}


def video_sentences(video):
    """Tokenized sentences for a video: description first, then the caption document."""
    out = []
    for source, text in (
        (Source.DESCRIPTION, video.description),
        (Source.CAPTION, cue_document(video.caption_cues)),
    ):
        index = 0
        for sent in split_sentences(text):
            tokens = tokenize(sent)
            if tokens:
                out.append(Sentence(video.video_id, source, index, tuple(tokens)))
                index += 1
    return out


# -- metadata ---------------------------------------------------------------

def _parse_knowledge(value, lineno, path):
    if value is None or value == "":
        return None
    try:
        return KnowledgeLabel(str(value).lower())
    except ValueError:
        raise ParseError(f"knowledge_label {value!r} not in {{high, low}}", line=lineno, path=path) from None


def load_metadata(path):
    """Read the JSON Lines metadata file into a list of dicts (captions not attached)."""
    records = []
    for lineno, line in enumerate(read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno, path=path) from None
        if not isinstance(obj, dict) or "video_id" not in obj:
            raise ParseError("record without video_id", line=lineno, path=path)
        duration = obj.get("duration_s", 0)
        if not isinstance(duration, int) or isinstance(duration, bool) or duration < 0:
            raise ParseError(f"duration_s must be a non-negative integer, got {duration!r}", line=lineno, path=path)
        records.append(
            dict(
                video_id=str(obj["video_id"]),
                title=str(obj.get("title", "")),
                description=str(obj.get("description", "")),
                duration_s=duration,
                channel=str(obj.get("channel", "")),
                knowledge_label=_parse_knowledge(obj.get("knowledge_label"), lineno, path),
            )
        )
    return records


def serialize_metadata(videos):
    lines = []
    for v in videos:
        obj = {
            "video_id": v.video_id,
            "title": v.title,
            "description": v.description,
            "duration_s": v.duration_s,
            "channel": v.channel,
        }
        if v.knowledge_label is not None:
            obj["knowledge_label"] = v.knowledge_label.value
        lines.append(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    return "".join(line + "\n" for line in lines)


# -- annotations ------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationRow:
    """One row of the tab-separated annotation file.

    Token rows carry ``label`` in {NA, MT}. A row whose label is ``high`` or
    ``low`` is a video-level label row; its sentence/token columns hold ``-``.
    """

    video_id: str
    source: Source | None
    sentence_index: int | None
    token_index: int | None
    token: str
    label: TokenLabel | KnowledgeLabel

    @property
    def is_video_label(self):
        return isinstance(self.label, KnowledgeLabel)


def _label(value, lineno, path):
    if value in ("NA", "MT"):
        return TokenLabel(value)
    if value in ("high", "low"):
        return KnowledgeLabel(value)
    raise ParseError(f"label {value!r} not in {{NA, MT, high, low}}", line=lineno, path=path)


def parse_annotations(raw, path=None):
    rows = []
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 6:
            raise ParseError(f"expected 6 tab-separated columns, got {len(cols)}", line=lineno, path=path)
        video_id, source, sent_idx, tok_idx, token, label = cols
        if lineno == 1 and video_id == "video_id":
            continue
        lab = _label(label, lineno, path)
        if isinstance(lab, KnowledgeLabel):
            rows.append(AnnotationRow(video_id, None, None, None, token, lab))
            continue
        try:
            src = Source(source)
        except ValueError:
            raise ParseError(f"source {source!r} not in {{desc, cap}}", line=lineno, path=path) from None
        try:
            si, ti = int(sent_idx), int(tok_idx)
        except ValueError:
            raise ParseError("sentence_index/token_index must be integers", line=lineno, path=path) from None
        if si < 0 or ti < 0:
            raise ParseError("negative index", line=lineno, path=path)
        rows.append(AnnotationRow(video_id, src, si, ti, token, lab))
    return rows


def read_annotations(path):
    return parse_annotations(read_text(path), path=path)


ANNOTATION_HEADER = "video_id\tsource\tsentence_index\ttoken_index\ttoken\tlabel"


def serialize_annotations(rows):
    lines = [ANNOTATION_HEADER]
    prev = None
    for r in rows:
        if r.is_video_label:
            lines.append(f"{r.video_id}\t-\t-\t-\t{r.token or '-'}\t{r.label.value}")
            prev = None
            continue
        key = (r.video_id, r.source, r.sentence_index)
        if prev is not None and key != prev:
            lines.append("")
        prev = key
        lines.append(f"{r.video_id}\t{r.source.value}\t{r.sentence_index}\t{r.token_index}\t{r.token}\t{r.label.value}")
    return "".join(line + "\n" for line in lines)


def corpus_annotation_rows(corpus):
    rows = []
    for s in corpus.annotated:
        for i, (tok, lab) in enumerate(zip(s.tokens, s.gold_labels)):
            rows.append(AnnotationRow(s.video_id, s.source, s.index, i, tok, lab))
    return rows


def _attach_labels(sentences, rows, path):
    """Join token rows onto sentences; returns (sentences, annotated index set)."""
    by_key = {s.key: i for i, s in enumerate(sentences)}
    grouped = {}
    for n, r in enumerate(rows, 1):
        key = (r.video_id, r.source, r.sentence_index)
        if key not in by_key:
            raise ValidationError(
                f"{path}: annotation row {n} refers to missing sentence "
                f"{r.video_id}/{r.source.value}/{r.sentence_index}"
            )
        sent = sentences[by_key[key]]
        if r.token_index >= len(sent.tokens) or sent.tokens[r.token_index] != r.token:
            got = sent.tokens[r.token_index] if r.token_index < len(sent.tokens) else None
            raise ValidationError(
                f"{path}: annotation row {n} token {r.token!r} does not match tokenizer output {got!r}"
            )
        labels = grouped.setdefault(key, {})
        if r.token_index in labels:
            raise ValidationError(f"{path}: annotation row {n} duplicates token {r.token_index}")
        labels[r.token_index] = r.label
    out = list(sentences)
    annotated = set()
    for key, labels in grouped.items():
        i = by_key[key]
        sent = out[i]
        if len(labels) != len(sent.tokens):
            raise ValidationError(
                f"{path}: sentence {'/'.join(map(str, (key[0], key[1].value, key[2])))} "
                f"has {len(labels)} of {len(sent.tokens)} tokens labeled"
            )
        out[i] = Sentence(sent.video_id, sent.source, sent.index, sent.tokens,
                          tuple(labels[j] for j in range(len(sent.tokens))))
        annotated.add(i)
    return out, frozenset(annotated)


def build_corpus(videos, rows=(), path=None):
    """Assemble a Corpus from video records and annotation rows."""
    videos = list(videos)
    index = {v.video_id: i for i, v in enumerate(videos)}
    token_rows = []
    for n, r in enumerate(rows, 1):
        if r.video_id not in index:
            raise ValidationError(f"{path}: annotation row {n} refers to unknown video {r.video_id!r}")
        if r.is_video_label:
            v = videos[index[r.video_id]]
            videos[index[r.video_id]] = VideoRecord(
                v.video_id, v.title, v.description, v.duration_s, v.channel,
                r.label, v.caption_cues, v.caption_format,
            )
        else:
            token_rows.append(r)
    sentences = [s for v in videos for s in video_sentences(v)]
    sentences, annotated = _attach_labels(sentences, token_rows, path)
    return Corpus(tuple(videos), tuple(sentences), annotated)


def load_annotated_corpus(metadata_path, captions_dir=None, annotations_path=None):
    """Load metadata, caption files and annotations into a :class:`Corpus`.

    Caption files are looked up as ``<video_id>.srt`` or ``<video_id>.vtt``
    inside ``captions_dir``; videos with neither get an empty cue list.
    """
    records = load_metadata(metadata_path)
    videos = []
    for rec in records:
        cues, fmt = (), None
        if captions_dir is not None:
            for ext in (CaptionFormat.SRT, CaptionFormat.WEBVTT):
                candidate = Path(captions_dir) / f"{rec['video_id']}.{ext.value}"
                if candidate.exists():
                    cues, fmt = tuple(read_caption_file(candidate)), ext
                    break
        videos.append(VideoRecord(**rec, caption_cues=cues, caption_format=fmt))
    rows = read_annotations(annotations_path) if annotations_path is not None else []
    corpus = build_corpus(videos, rows, path=annotations_path)
    counts = corpus.label_counts()
    logger.info(
        "loaded %d videos (%d high / %d low), %d sentences, %d annotated",
        len(corpus.videos), counts[KnowledgeLabel.HIGH], counts[KnowledgeLabel.LOW],
        len(corpus.sentences), len(corpus.annotated_subset),
    )
    return corpus


def save_corpus(corpus, directory):
    """Write ``metadata.jsonl``, ``captions/`` and ``annotations.tsv`` under ``directory``.

    Returns the three paths in the order accepted by :func:`load_annotated_corpus`.
    """
    directory = Path(directory)
    cap_dir = directory / "captions"
    cap_dir.mkdir(parents=True, exist_ok=True)
    meta = directory / "metadata.jsonl"
    ann = directory / "annotations.tsv"
    write_text(meta, serialize_metadata(corpus.videos))
    for v in corpus.videos:
        if v.caption_cues:
            fmt = v.caption_format or CaptionFormat.SRT
            write_text(cap_dir / f"{v.video_id}.{fmt.value}", serialize_captions(v.caption_cues, fmt))
    rows = corpus_annotation_rows(corpus)
    rows += [AnnotationRow(v.video_id, None, None, None, "-", v.knowledge_label)
             for v in corpus.videos if v.knowledge_label is not None]
    write_text(ann, serialize_annotations(rows))
    return meta, cap_dir, ann


# -- splitting --------------------------------------------------------------

def _apportion(sizes, fraction):
    """Largest-remainder apportionment of round(fraction * total) across groups."""
    total = sum(sizes)
    target = int(np.floor(fraction * total + 0.5))
    exact = [fraction * n for n in sizes]
    alloc = [int(np.floor(x)) for x in exact]
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in order[: max(0, target - sum(alloc))]:
        alloc[i] += 1
    # every class keeps at least one video on each side
    return [min(max(a, 1), n - 1) for a, n in zip(alloc, sizes)]


def split_dataset(corpus, train_fraction=0.8, seed=0, stratify=True):
    """Split video ids into disjoint, exhaustive train and test sets.

    With ``stratify`` the train share of each knowledge class is
    apportioned by largest remainder, so class ratios are kept to within
    one video per class.

    Returns
    -------
    train_ids, test_ids : list of str
        Both sorted.
    """
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    ids = sorted(v.video_id for v in corpus.videos)
    if stratify:
        missing = [v.video_id for v in corpus.videos if v.knowledge_label is None]
        if missing:
            raise ValidationError(f"stratified split needs knowledge_label; {missing[0]} has none")
        groups = [sorted(v.video_id for v in corpus.videos if v.knowledge_label is lab)
                  for lab in KnowledgeLabel]
        groups = [g for g in groups if g]
        small = [len(g) for g in groups if len(g) < 2]
        if small or len(groups) < 2:
            raise ValidationError("stratified split needs at least 2 videos in each class")
    else:
        if len(ids) < 2:
            raise ValidationError("need at least 2 videos to split")
        groups = [ids]
    train = []
    for group, n_train in zip(groups, _apportion([len(g) for g in groups], train_fraction)):
        perm = rng.permutation(len(group))
        train.extend(group[i] for i in perm[:n_train])
    train_set = set(train)
    return sorted(train_set), [i for i in ids if i not in train_set]
