"""Per-frame object predictions: ingestion, filtering, medical-object counts."""

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from ._io import read_text
from .exceptions import ParseError, ValidationError

SECONDS_PER_FRAME = 2
TOP_K = 5
FRAME_HEADER = ("video_id", "frame_index", "rank", "category", "probability")


def sampling_schedule(duration_s):
    """Frame timestamps 0, 2, 4, ... strictly before ``duration_s``."""
    if duration_s < 0:
        raise ValidationError(f"duration_s must be >= 0, got {duration_s}")
    return [SECONDS_PER_FRAME * i for i in range(expected_frame_count(duration_s))]


def expected_frame_count(duration_s):
    return math.ceil(duration_s / SECONDS_PER_FRAME)


@dataclass(frozen=True)
class FramePrediction:
    video_id: str
    frame_index: int
    top: tuple  # ((category, probability), ...) sorted by probability descending
    padded: bool = False

    @property
    def timestamp_s(self):
        return self.frame_index * SECONDS_PER_FRAME


def _padded(entries):
    missing = TOP_K - len(entries)
    return tuple(entries) + (("", 0.0),) * missing, missing > 0


def parse_frame_predictions(raw, path=None):
    """Parse the frame prediction CSV into frames ordered by (video_id, frame_index).

    Ranks must be 1..5 with non-increasing probabilities. Frames with fewer
    than five rows are padded with ``("", 0.0)`` and flagged.
    """
    reader = csv.reader(io.StringIO(raw))
    rows = list(reader)
    if not rows:
        return []
    if tuple(c.strip() for c in rows[0]) != FRAME_HEADER:
        raise ParseError(f"expected header {','.join(FRAME_HEADER)}", line=1, path=path)
    groups = {}
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 columns, got {len(row)}", line=lineno, path=path)
        video_id, frame_index, rank, category, prob = row
        try:
            frame_index, rank, prob = int(frame_index), int(rank), float(prob)
        except ValueError:
            raise ParseError("non-numeric frame_index, rank or probability", line=lineno, path=path) from None
        if frame_index < 0:
            raise ParseError("negative frame_index", line=lineno, path=path)
        if not 1 <= rank <= TOP_K:
            raise ParseError(f"rank {rank} outside 1..{TOP_K}", line=lineno, path=path)
        if not 0.0 <= prob <= 1.0:
            raise ParseError(f"probability {prob} outside [0, 1]", line=lineno, path=path)
        entries = groups.setdefault((video_id, frame_index), {})
        if rank in entries:
            raise ParseError(f"duplicate rank {rank} for frame {frame_index}", line=lineno, path=path)
        entries[rank] = (category.strip().lower(), prob, lineno)
    frames = []
    for (video_id, frame_index), entries in sorted(groups.items()):
        if len(entries) > TOP_K:
            raise ParseError(f"more than {TOP_K} entries for {video_id} frame {frame_index}", path=path)
        ordered = [entries[r] for r in sorted(entries)]
        for prev, cur in zip(ordered, ordered[1:]):
            if cur[1] > prev[1]:
                raise ParseError(
                    f"probabilities not descending by rank for {video_id} frame {frame_index}",
                    line=cur[2], path=path,
                )
        top, padded = _padded([(c, p) for c, p, _ in ordered])
        frames.append(FramePrediction(video_id, frame_index, top, padded))
    return frames


def read_frame_predictions(path):
    return parse_frame_predictions(read_text(path), path=path)


def serialize_frame_predictions(frames):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FRAME_HEADER)
    for fr in frames:
        for rank, (cat, prob) in enumerate(fr.top, 1):
            if fr.padded and cat == "" and prob == 0.0:
                continue
            writer.writerow([fr.video_id, fr.frame_index, rank, cat, repr(float(prob))])
    return buf.getvalue()


def filter_predictions(frames, threshold):
    """Drop entries with probability below ``threshold``; frames themselves are kept."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must be in [0, 1], got {threshold}")
    return [
        FramePrediction(f.video_id, f.frame_index, tuple(e for e in f.top if e[1] >= threshold), f.padded)
        for f in frames
    ]


class CountMode(str, Enum):
    OCCURRENCES = "occurrences"
    DISTINCT = "distinct"


@dataclass(frozen=True)
class VideoObjectSummary:
    video_id: str
    frames_seen: int = 0
    medical_object_count: int = 0
    distinct_medical_categories: frozenset = field(default_factory=frozenset)


def count_medical_objects(frames, lexicon, threshold=0.10, mode=CountMode.OCCURRENCES, video_id=None):
    """Count medically relevant object hits for one video.

    In ``occurrences`` mode every surviving (frame, category) hit counts;
    in ``distinct`` mode each category counts once.
    """
    lexicon = frozenset(lexicon)
    if not lexicon:
        raise ValidationError("medical object lexicon is empty")
    mode = CountMode(mode)
    ids = {f.video_id for f in frames}
    if len(ids) > 1:
        raise ValidationError(f"frames from several videos: {sorted(ids)}")
    if video_id is None:
        if not ids:
            raise ValidationError("video_id is required when there are no frames")
        video_id = ids.pop()
    elif ids and ids != {video_id}:
        raise ValidationError(f"frames belong to {ids.pop()}, not {video_id}")
    hits = [cat for f in filter_predictions(frames, threshold) for cat, _ in f.top if cat in lexicon]
    distinct = frozenset(hits)
    count = len(hits) if mode is CountMode.OCCURRENCES else len(distinct)
    return VideoObjectSummary(video_id, len(frames), count, distinct)


def parse_object_lexicon(raw):
    labels = set()
    for line in raw.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            labels.add(line)
    return frozenset(labels)


def load_object_lexicon(path=None):
    """Read a lexicon file; without a path, the bundled starter lexicon."""
    if path is None:
        raw = resources.files("medlit").joinpath("data/medical_objects.txt").read_text(encoding="utf-8")
    else:
        raw = read_text(path)
    return parse_object_lexicon(raw)


def summarize_videos(frames, video_ids, lexicon, threshold=0.10, mode=CountMode.OCCURRENCES):
    """One summary per id in ``video_ids``; videos without frames get zeros."""
    by_video = {}
    for f in frames:
        by_video.setdefault(f.video_id, []).append(f)
    return {vid: count_medical_objects(by_video.get(vid, []), lexicon, threshold, mode, video_id=vid)
            for vid in video_ids}


SUMMARY_HEADER = ("video_id", "frames_seen", "medical_object_count", "distinct_categories")


def serialize_summaries(summaries):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for s in summaries:
        writer.writerow([s.video_id, s.frames_seen, s.medical_object_count,
                         ";".join(sorted(s.distinct_medical_categories))])
    return buf.getvalue()


def parse_summaries(raw, path=None):
    rows = list(csv.reader(io.StringIO(raw)))
    if not rows or tuple(rows[0]) != SUMMARY_HEADER:
        raise ParseError("bad object summary header", line=1, path=path)
    out = {}
    for lineno, row in enumerate(rows[1:], 2):
        try:
            vid, seen, count, cats = row
            out[vid] = VideoObjectSummary(vid, int(seen), int(count),
                                          frozenset(c for c in cats.split(";") if c))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
    return out
