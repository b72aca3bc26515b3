from pathlib import Path

from medlit.corpus import KnowledgeLabel
from medlit.metrics import ClassMetrics, f_measure, prf_from_counts
from medlit.report import EvaluationResult, KappaResult, render_report, render_table_csv

HIGH, LOW = KnowledgeLabel.HIGH, KnowledgeLabel.LOW
GOLDEN = Path(__file__).parent / "golden"


def layout_fixture():
    """Fixed metrics shaped like a full evaluation; no training involved."""
    p = {HIGH: 0.865, LOW: 0.838}
    r = {HIGH: 0.805, LOW: 0.843}
    clf = ClassMetrics((HIGH, LOW), p, r, {c: f_measure(p[c], r[c]) for c in p}, {HIGH: 77, LOW: 43}, 0.85)
    return EvaluationResult(
        classification=clf,
        n_test_videos=120,
        ner={"BLSTM, token": prf_from_counts(93, 7, 7), "BLSTM, exact span": prf_from_counts(0, 0, 4),
             "Lexicon baseline, token": None},
        n_ner_sentences=40,
        n_ner_tokens=512,
        kappa={"Medical terms (tokens)": KappaResult(0.8123, 0.951, 512), "Knowledge labels (videos)": None},
    )


def test_layout_matches_golden():
    text = render_report(layout_fixture(), [("seed", 0), ("tagger_hidden", 150)])
    assert text == (GOLDEN / "table_layout.txt").read_text(encoding="utf-8")


def test_zero_denominator_footnote():
    text = render_report(layout_fixture())
    assert "0.0%*" in text
    assert text.rstrip().endswith("* zero denominator; reported as 0")


def test_table_csv():
    rows = render_table_csv(layout_fixture().classification).splitlines()
    assert rows[0] == "class,precision,recall,f_measure"
    assert rows[1] == "High Medical Knowledge Videos,0.8650,0.8050,0.8339"
