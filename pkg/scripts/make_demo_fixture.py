"""Regenerate the bundled 20-video demo fixture under src/medlit/data/demo/.

The output is deterministic. Gold token labels come from a full gazetteer
of the generator's terms; ``terms.txt`` (the baseline lexicon) holds only
part of it, so the lexicon baseline is imperfect by construction.
"""

import json
import random
from pathlib import Path

from medlit.captions import CaptionCue, CaptionFormat, serialize_captions
from medlit.corpus import (AnnotationRow, KnowledgeLabel, TokenLabel, load_annotated_corpus,
                           serialize_annotations)
from medlit.tagger import lexicon_baseline_tag
from medlit.text import tokenize

OUT = Path(__file__).resolve().parent.parent / "src" / "medlit" / "data" / "demo"

TERMS = [
    "insulin", "metformin", "glucose", "blood sugar", "a1c", "hyperglycemia", "hypoglycemia",
    "neuropathy", "retinopathy", "pancreas", "beta cells", "insulin resistance", "type 2 diabetes",
    "glucometer", "carbohydrates", "ketoacidosis", "endocrinologist", "sulfonylurea", "glp-1",
    "nephropathy", "gestational diabetes", "fasting glucose",
]
BASELINE_TERMS = TERMS[::2] + ["diabetes"]

HIGH_TEMPLATES = [
    "Your {t} plays a key role in managing {t}.",
    "Doctors often prescribe {t} when {t} stays high.",
    "Untreated {t} can lead to {t} over time.",
    "Ask your endocrinologist how {t} affects {t}.",
    "Checking {t} every morning helps you spot {t} early.",
    "We explain how {t} works inside the {t}.",
    "Lowering {t} reduces the risk of {t}.",
]
LOW_TEMPLATES = [
    "I tried a new recipe today and it was great!",
    "Thanks for watching and please subscribe.",
    "My family loved this dessert.",
    "Let me know in the comments what you think.",
    "Today we are going for a walk in the park.",
    "Some people say {t} is scary but I feel fine.",
    "This smoothie is my favorite snack.",
]
MEDICAL_OBJECTS = ["syringe", "stethoscope", "pill bottle", "lab coat", "medicine chest", "band aid"]
OTHER_OBJECTS = ["television", "plate", "pizza", "suit", "notebook", "desk", "banana", "cellular telephone",
                 "website", "restaurant", "park bench", "t-shirt"]


def sentence(rng, template):
    picks = [rng.choice(TERMS) for _ in range(template.count("{t}"))]
    return template.replace("{t}", "{}").format(*picks)


def cues_from_text(rng, text):
    words = text.split()
    cues, t, i = [], 0, 0
    while i < len(words):
        n = rng.randint(5, 8)
        dur = rng.randint(1500, 3500)
        cues.append(CaptionCue(t, t + dur, " ".join(words[i:i + n])))
        t += dur + rng.randint(0, 400)
        i += n
    return cues


def frames_rows(rng, vid, duration, high):
    rows = []
    for frame in range((duration + 1) // 2):
        pool = OTHER_OBJECTS[:]
        rng.shuffle(pool)
        cats = pool[:5]
        if rng.random() < (0.45 if high else 0.1):
            cats[rng.randrange(3)] = rng.choice(MEDICAL_OBJECTS)
        raw = sorted((rng.random() ** 2 for _ in range(5)), reverse=True)
        total = sum(raw) / rng.uniform(0.6, 0.95)
        probs = sorted((round(p / total, 4) for p in raw), reverse=True)
        rows += [f"{vid},{frame},{r},{c},{p}" for r, (c, p) in enumerate(zip(cats, probs), 1)]
    return rows


def main():
    rng = random.Random(2019)
    (OUT / "captions").mkdir(parents=True, exist_ok=True)
    for old in (OUT / "captions").iterdir():
        old.unlink()
    labels = [KnowledgeLabel.HIGH] * 12 + [KnowledgeLabel.LOW] * 8
    rng.shuffle(labels)
    meta, frame_rows = [], ["video_id,frame_index,rank,category,probability"]
    for k, label in enumerate(labels, 1):
        vid = f"vid{k:02d}"
        high = label is KnowledgeLabel.HIGH
        # a few crossover videos keep the task from being trivially separable
        if k in (4, 13):
            high = not high
        pick = HIGH_TEMPLATES if high else LOW_TEMPLATES
        desc = " ".join(sentence(rng, rng.choice(pick)) for _ in range(rng.randint(2, 3)))
        if rng.random() < 0.3:
            desc += "\nSee e.g. our channel for more."
        duration = rng.randint(40, 90)
        meta.append({"video_id": vid, "title": f"Diabetes video {k}", "description": desc,
                     "duration_s": duration, "channel": "clinic" if high else "vlog",
                     "knowledge_label": label.value})
        if k != 20:
            mix = [sentence(rng, rng.choice(pick if rng.random() < 0.75 else HIGH_TEMPLATES + LOW_TEMPLATES))
                   for _ in range(rng.randint(3, 5))]
            cues = cues_from_text(rng, " ".join(mix))
            fmt = CaptionFormat.WEBVTT if k % 3 == 0 else CaptionFormat.SRT
            text = serialize_captions(cues, fmt)
            if fmt is CaptionFormat.WEBVTT:
                first = cues[0].text.split()[0]
                text = text.replace(f"\n{first} ", f"\n<i>{first}</i> ", 1)
            (OUT / "captions" / f"{vid}.{fmt.value}").write_text(text, encoding="utf-8")
        frame_rows += frames_rows(rng, vid, duration, high)

    (OUT / "metadata.jsonl").write_text(
        "".join(json.dumps(m, sort_keys=True) + "\n" for m in meta), encoding="utf-8")
    (OUT / "frames.csv").write_text("\n".join(frame_rows) + "\n", encoding="utf-8")

    corpus = load_annotated_corpus(OUT / "metadata.jsonl", OUT / "captions")
    gazetteer = {tuple(tokenize(t)) for t in TERMS}
    rows, rows_b = [], []
    for s in corpus.sentences:
        # captions of the last three videos stay unannotated
        if s.source.value == "cap" and s.video_id in ("vid18", "vid19", "vid20"):
            continue
        for i, (tok, lab) in enumerate(zip(s.tokens, lexicon_baseline_tag(gazetteer, list(s.tokens)))):
            rows.append(AnnotationRow(s.video_id, s.source, s.index, i, tok, lab))
            flip = rng.random() < 0.04
            other = TokenLabel.NA if lab is TokenLabel.MT else TokenLabel.MT
            rows_b.append(AnnotationRow(s.video_id, s.source, s.index, i, tok, other if flip else lab))
    for m in meta:
        lab = KnowledgeLabel(m["knowledge_label"])
        if m["video_id"] == "vid07":
            lab = KnowledgeLabel.LOW if lab is KnowledgeLabel.HIGH else KnowledgeLabel.HIGH
        rows_b.append(AnnotationRow(m["video_id"], None, None, None, "-", lab))
    (OUT / "annotations.tsv").write_text(serialize_annotations(rows), encoding="utf-8")
    (OUT / "rater_b.tsv").write_text(serialize_annotations(rows_b), encoding="utf-8")
    (OUT / "terms.txt").write_text(
        "# partial gazetteer for the lexicon baseline\n" + "\n".join(BASELINE_TERMS) + "\n", encoding="utf-8")
    (OUT / "demo.cfg").write_text(DEMO_CFG, encoding="utf-8")


DEMO_CFG = """\
# Demo run over the bundled 20-video fixture.
# Paths are relative to this file. Output goes to ./medlit-out unless -o is given.
metadata = metadata.jsonl
captions_dir = captions
annotations = annotations.tsv
frame_predictions = frames.csv
term_lexicon = terms.txt
rater_b_annotations = rater_b.tsv

seed = 7
emb_epochs = 3
tagger_epochs = 15
tagger_learning_rate = 0.1
"""

if __name__ == "__main__":
    main()
