"""Plain-text and CSV evaluation reports: per-class precision/recall/F table plus accuracy."""

import csv
import io
from dataclasses import dataclass, field

from .corpus import KnowledgeLabel

CLASS_ROWS = (
    (KnowledgeLabel.HIGH, "High Medical Knowledge Videos"),
    (KnowledgeLabel.LOW, "Low Medical Knowledge Videos"),
)
NA = "n/a"


@dataclass
class KappaResult:
    kappa: float
    agreement: float
    n_items: int


@dataclass
class EvaluationResult:
    classification: object = None  # ClassMetrics keyed by KnowledgeLabel
    n_test_videos: int = 0
    ner: dict = field(default_factory=dict)  # row name -> ClassMetrics (MT) or None
    n_ner_sentences: int = 0
    n_ner_tokens: int = 0
    kappa: dict = field(default_factory=dict)  # row name -> KappaResult or None


def pct(value, flagged=False):
    return f"{100 * value:.1f}%" + ("*" if flagged else "")


def _row(name, cells, width=34):
    return f"{name:<{width}}" + "".join(f"{c:>12}" for c in cells)


def _prf_cells(m, cls):
    if m is None:
        return [NA] * 3
    return [
        pct(m.precision[cls], f"precision:{cls}" in m.flags),
        pct(m.recall[cls], f"recall:{cls}" in m.flags),
        pct(m.f_measure[cls], f"precision:{cls}" in m.flags or f"recall:{cls}" in m.flags),
    ]


def classification_table(metrics, title="Medical Knowledge Classification Evaluation Results"):
    lines = [title, "", _row("", ["Precision", "Recall", "F-measure"])]
    for cls, name in CLASS_ROWS:
        lines.append(_row(name, _prf_cells(metrics, cls)))
    acc = NA if metrics is None else pct(metrics.accuracy)
    lines.append(f"Overall accuracy: {acc}")
    return lines


def render_report(result, config_items=()):
    flagged = False
    lines = classification_table(result.classification)
    lines.insert(1, f"Test videos: {result.n_test_videos}")
    if result.classification is not None and result.classification.flags:
        flagged = True

    lines += ["", "Medical Term Extraction (MT label)", "",
              f"Test sentences: {result.n_ner_sentences}, tokens: {result.n_ner_tokens}",
              _row("", ["Precision", "Recall", "F-measure"])]
    if not result.ner:
        lines.append(_row("(no annotated test sentences)", [NA] * 3))
    for name, m in result.ner.items():
        lines.append(_row(name, _prf_cells(m, "MT")))
        flagged |= m is not None and bool(m.flags)

    lines += ["", "Inter-rater Reliability", "", _row("", ["Kappa", "Agreement", "Items"])]
    if not result.kappa:
        lines.append(_row("(no second annotator)", [NA] * 3))
    for name, k in result.kappa.items():
        cells = [NA] * 3 if k is None else [f"{k.kappa:.3f}", pct(k.agreement), str(k.n_items)]
        lines.append(_row(name, cells))
    lines.append("Kappa is Cohen's kappa; agreement is raw percent agreement.")

    if flagged:
        lines += ["", "* zero denominator; reported as 0"]
    if config_items:
        lines += ["", "Configuration", ""]
        lines += [f"{k} = {v}" for k, v in config_items]
    return "\n".join(lines) + "\n"


def render_table_csv(metrics):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "precision", "recall", "f_measure"])
    for cls, name in CLASS_ROWS:
        if metrics is None:
            w.writerow([name, NA, NA, NA])
        else:
            w.writerow([name] + [f"{v:.4f}" for v in (metrics.precision[cls], metrics.recall[cls],
                                                      metrics.f_measure[cls])])
    w.writerow(["overall_accuracy", NA if metrics is None else f"{metrics.accuracy:.4f}", "", ""])
    return buf.getvalue()
