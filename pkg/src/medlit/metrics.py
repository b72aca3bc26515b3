"""Confusion matrices, precision/recall/F, span scoring and Cohen's kappa."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # counts[i, j]: gold classes[i], predicted classes[j]

    @property
    def total(self):
        return int(self.counts.sum())

    def __eq__(self, other):
        return (isinstance(other, ConfusionMatrix) and self.classes == other.classes
                and np.array_equal(self.counts, other.counts))


def confusion(gold, predicted, classes):
    gold, predicted = list(gold), list(predicted)
    if len(gold) != len(predicted):
        raise ValidationError(f"{len(gold)} gold labels vs {len(predicted)} predicted")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, predicted):
        try:
            counts[index[g], index[p]] += 1
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]!r} not in {classes}") from None
    return ConfusionMatrix(classes, counts)


def f_measure(precision, recall):
    """Harmonic mean; 0 when both are 0."""
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def _ratio(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class precision/recall/F.

    ``flags`` lists ``"precision:<class>"`` or ``"recall:<class>"`` for
    every value defined as 0 because its denominator was 0.
    """

    classes: tuple
    precision: dict
    recall: dict
    f_measure: dict
    support: dict
    accuracy: float | None = None
    flags: frozenset = field(default_factory=frozenset)


def prf_from_counts(tp, fp, fn, name="MT"):
    p, p_flag = _ratio(tp, tp + fp)
    r, r_flag = _ratio(tp, tp + fn)
    flags = {f"precision:{name}"} if p_flag else set()
    if r_flag:
        flags.add(f"recall:{name}")
    return ClassMetrics((name,), {name: p}, {name: r}, {name: f_measure(p, r)},
                        {name: tp + fn}, None, frozenset(flags))


def class_metrics(matrix):
    """Precision, recall and F per class plus accuracy = trace / total."""
    m = matrix.counts
    precision, recall, fm, support, flags = {}, {}, {}, {}, set()
    for i, c in enumerate(matrix.classes):
        tp = int(m[i, i])
        p, p_flag = _ratio(tp, int(m[:, i].sum()))
        r, r_flag = _ratio(tp, int(m[i, :].sum()))
        if p_flag:
            flags.add(f"precision:{c}")
        if r_flag:
            flags.add(f"recall:{c}")
        precision[c], recall[c], fm[c] = p, r, f_measure(p, r)
        support[c] = int(m[i, :].sum())
    accuracy, acc_flag = _ratio(int(np.trace(m)), int(m.sum()))
    if acc_flag:
        flags.add("accuracy")
    return ClassMetrics(matrix.classes, precision, recall, fm, support, accuracy, frozenset(flags))


def _span_pairs(spans):
    out = []
    for s in spans:
        start, end = (s.start_token, s.end_token) if hasattr(s, "start_token") else tuple(s)
        if end < start:
            raise ValidationError(f"span ({start}, {end}) ends before it starts")
        out.append((start, end))
    out.sort()
    for (s0, e0), (s1, e1) in zip(out, out[1:]):
        if s1 <= e0:
            raise ValidationError(f"overlapping spans ({s0}, {e0}) and ({s1}, {e1})")
    return out


def span_f_measure(gold_spans, predicted_spans, mode="token", lengths=None):
    """Score predicted MT spans against gold spans, sentence by sentence.

    Parameters
    ----------
    gold_spans, predicted_spans : list of list of spans
        One inner list per sentence; a span is a :class:`MedicalSpan` or an
        inclusive ``(start, end)`` pair.
    mode : {"token", "exact_span"}
        ``token`` scores individual MT tokens. ``exact_span`` counts a
        prediction as correct only when both boundaries match a gold span.
    lengths : list of int, optional
        Sentence lengths. In token mode they give the full NA/MT confusion
        matrix, so NA metrics and accuracy are filled in too.
    """
    if len(gold_spans) != len(predicted_spans):
        raise ValidationError(f"{len(gold_spans)} gold sentences vs {len(predicted_spans)} predicted")
    if mode not in ("token", "exact_span"):
        raise ValidationError(f"unknown mode {mode!r}")
    tp = fp = fn = 0
    token_cm = np.zeros((2, 2), dtype=np.int64)
    for k, (gs, ps) in enumerate(zip(gold_spans, predicted_spans)):
        g, p = _span_pairs(gs), _span_pairs(ps)
        if mode == "exact_span":
            hits = len(set(g) & set(p))
            tp, fp, fn = tp + hits, fp + len(p) - hits, fn + len(g) - hits
            continue
        gt = {i for s, e in g for i in range(s, e + 1)}
        pt = {i for s, e in p for i in range(s, e + 1)}
        tp, fp, fn = tp + len(gt & pt), fp + len(pt - gt), fn + len(gt - pt)
        if lengths is not None:
            n = lengths[k]
            if (gt | pt) and max(gt | pt) >= n:
                raise ValidationError(f"sentence {k}: span beyond length {n}")
            token_cm += [[n - len(gt | pt), len(pt - gt)], [len(gt - pt), len(gt & pt)]]
    if mode == "token" and lengths is not None:
        return class_metrics(ConfusionMatrix(("NA", "MT"), token_cm))
    return prf_from_counts(tp, fp, fn)


def percent_agreement(ratings_a, ratings_b):
    a, b = list(ratings_a), list(ratings_b)
    if len(a) != len(b):
        raise ValidationError(f"{len(a)} vs {len(b)} ratings")
    if not a:
        raise ValidationError("no ratings")
    return sum(x == y for x, y in zip(a, b)) / len(a)


def cohen_kappa(ratings_a, ratings_b):
    """Cohen's kappa, ``(p_o - p_e) / (1 - p_e)`` with ``p_e`` from the two raters' marginals."""
    p_o = percent_agreement(ratings_a, ratings_b)
    labels = sorted(set(ratings_a) | set(ratings_b), key=str)
    cm = confusion(ratings_a, ratings_b, labels).counts.astype(float)
    n = cm.sum()
    p_e = float((cm.sum(axis=1) / n) @ (cm.sum(axis=0) / n))
    if np.isclose(p_e, 1.0, rtol=0, atol=1e-15):
        if p_o == 1.0:
            return 1.0
        raise ValidationError("kappa undefined: expected agreement is 1 but observed agreement is not")
    return (p_o - p_e) / (1.0 - p_e)
