import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medlit.exceptions import ParseError, ValidationError
from medlit.frames import (CountMode, FramePrediction, count_medical_objects, expected_frame_count,
                           filter_predictions, load_object_lexicon, parse_frame_predictions,
                           parse_summaries, sampling_schedule, serialize_frame_predictions,
                           serialize_summaries, summarize_videos)

from synthetic import random_frames

HEADER = "video_id,frame_index,rank,category,probability\n"
DESC = (0.6, 0.2, 0.1, 0.06, 0.04)


def _csv(rows):
    return HEADER + "".join(",".join(map(str, r)) + "\n" for r in rows)


def _frame_rows(vid, idx, probs, cats=("syringe", "desk", "cat", "plate", "pizza")):
    return [(vid, idx, r, c, p) for r, (c, p) in enumerate(zip(cats, probs), 1)]


def test_schedule_examples():
    assert sampling_schedule(61) == list(range(0, 61, 2))
    assert len(sampling_schedule(61)) == 31
    assert sampling_schedule(0) == []
    assert sampling_schedule(1) == [0]
    assert sampling_schedule(4.5) == [0, 2, 4]
    with pytest.raises(ValidationError):
        sampling_schedule(-1)


def test_schedule_length_full_range():
    for d in range(10_001):
        assert len(sampling_schedule(d)) == math.ceil(d / 2) == expected_frame_count(d)


def test_manifest_total_frames():
    durations = np.random.default_rng(0).integers(0, 3600, size=50).tolist()
    brute = sum(len([t for t in range(0, d) if t % 2 == 0]) for d in durations)
    assert sum(len(sampling_schedule(d)) for d in durations) == brute


def test_parse_three_frames():
    rows = _frame_rows("v", 2, DESC) + _frame_rows("v", 0, DESC) + _frame_rows("v", 1, DESC)
    frames = parse_frame_predictions(_csv(rows))
    assert [f.frame_index for f in frames] == [0, 1, 2]
    assert all(len(f.top) == 5 and not f.padded for f in frames)
    assert frames[1].timestamp_s == 2


def test_parse_empty():
    assert parse_frame_predictions("") == []
    assert parse_frame_predictions(HEADER) == []


def test_descending_accepted_permuted_rejected():
    assert parse_frame_predictions(_csv(_frame_rows("v", 0, DESC)))
    permuted = (0.2, 0.6, 0.1, 0.06, 0.04)
    with pytest.raises(ParseError, match="probabilit"):
        parse_frame_predictions(_csv(_frame_rows("v", 0, permuted)))


def test_parse_errors_carry_line():
    bad = _frame_rows("v", 0, DESC)
    bad[2] = ("v", 0, 3, "cat", 1.5)
    with pytest.raises(ParseError) as err:
        parse_frame_predictions(_csv(bad))
    assert err.value.line == 4
    too_many = _frame_rows("v", 0, DESC) + [("v", 0, 6, "x", 0.01)]
    with pytest.raises(ParseError):
        parse_frame_predictions(_csv(too_many))
    dup = _frame_rows("v", 0, DESC)
    dup[1] = ("v", 0, 1, "desk", 0.2)
    with pytest.raises(ParseError, match="duplicate"):
        parse_frame_predictions(_csv(dup))
    with pytest.raises(ParseError, match="header"):
        parse_frame_predictions("a,b\n")


def test_short_frame_padded():
    frames = parse_frame_predictions(_csv(_frame_rows("v", 0, (0.7, 0.3))))
    assert frames[0].padded
    assert frames[0].top[2:] == (("", 0.0),) * 3
    assert parse_frame_predictions(serialize_frame_predictions(frames)) == frames


def test_frame_csv_round_trip():
    rng = np.random.default_rng(3)
    frames = random_frames(rng, "a", 4) + random_frames(rng, "b", 3)
    raw = serialize_frame_predictions(frames)
    again = parse_frame_predictions(raw)
    assert again == frames
    assert serialize_frame_predictions(again) == raw


def test_filter_examples():
    frames = parse_frame_predictions(_csv(_frame_rows("v", 0, DESC) + _frame_rows("v", 1, (1.0, 0, 0, 0, 0))))
    assert filter_predictions(frames, 0.0) == frames
    assert [len(f.top) for f in filter_predictions(frames, 1.0)] == [0, 1]
    assert len(filter_predictions(frames, 0.10)[0].top) == 3
    with pytest.raises(ValidationError):
        filter_predictions(frames, 1.5)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_filter_keeps_frames(seed, threshold):
    frames = random_frames(np.random.default_rng(seed))
    out = filter_predictions(frames, threshold)
    assert len(out) == len(frames)
    assert all(p >= threshold for f in out for _, p in f.top)


def test_count_examples():
    frames = [FramePrediction("v", 0, (("syringe", 0.5), ("desk", 0.3)))]
    assert count_medical_objects(frames, {"syringe"}, 0.1).medical_object_count == 1
    assert count_medical_objects(frames, {"beaker"}, 0.1).medical_object_count == 0
    with pytest.raises(ValidationError, match="empty"):
        count_medical_objects(frames, set())


def _scan(frames, lexicon, threshold, mode):
    hits = [c for f in frames for c, p in f.top if p >= threshold and c in lexicon]
    return len(hits) if mode == "occurrences" else len(set(hits))


def test_count_ten_frame_fixture():
    frames = random_frames(np.random.default_rng(10), n_frames=10)
    lex = {"syringe", "stethoscope", "pill bottle"}
    for mode in ("occurrences", "distinct"):
        for t in (0.0, 0.05, 0.1, 0.3):
            assert count_medical_objects(frames, lex, t, mode).medical_object_count == _scan(frames, lex, t, mode)


def test_count_threshold_monotone():
    rng = np.random.default_rng(2024)
    lex = {"syringe", "stethoscope", "pill bottle"}
    for _ in range(500):
        frames = random_frames(rng, n_frames=int(rng.integers(1, 12)))
        t1, t2 = sorted(rng.uniform(0, 1, size=2))
        for mode in CountMode:
            lo = count_medical_objects(frames, lex, t1, mode).medical_object_count
            hi = count_medical_objects(frames, lex, t2, mode).medical_object_count
            assert hi <= lo


def test_count_rejects_mixed_videos():
    frames = random_frames(np.random.default_rng(0), "a", 2) + random_frames(np.random.default_rng(1), "b", 2)
    with pytest.raises(ValidationError):
        count_medical_objects(frames, {"syringe"})


def test_bundled_lexicon():
    lex = load_object_lexicon()
    assert {"syringe", "stethoscope", "pill bottle"} <= lex


def test_summaries_round_trip():
    rng = np.random.default_rng(5)
    frames = random_frames(rng, "a", 6) + random_frames(rng, "b", 6)
    summaries = summarize_videos(frames, ["a", "b", "c"], {"syringe", "pill bottle"})
    assert summaries["c"].frames_seen == 0 and summaries["c"].medical_object_count == 0
    assert parse_summaries(serialize_summaries(summaries.values())) == summaries


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_occurrences_at_least_distinct(seed, threshold):
    frames = random_frames(np.random.default_rng(seed))
    lex = {"syringe", "pill bottle", "stethoscope"}
    occ = count_medical_objects(frames, lex, threshold, "occurrences", video_id="v")
    dis = count_medical_objects(frames, lex, threshold, "distinct", video_id="v")
    assert occ.medical_object_count >= dis.medical_object_count
    assert occ.medical_object_count >= len(occ.distinct_medical_categories)
