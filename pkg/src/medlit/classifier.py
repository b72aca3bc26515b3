"""Video-level features and the logistic-regression knowledge classifier."""

import csv
import io
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._io import read_text, write_text
from ._numeric import GradientCheckReport, relative_error
from .corpus import KnowledgeLabel, TokenLabel
from .exceptions import NumericalError, ParseError, ValidationError

FEATURE_NAMES = ("cap_mt", "desc_mt", "med_obj")


class FeatureMode(str, Enum):
    COUNTS = "counts"
    RATES = "rates"
    COMBINED = "combined"


@dataclass(frozen=True)
class FeatureVector:
    video_id: str
    caption_mt_count: int = 0
    description_mt_count: int = 0
    medical_object_count: int = 0
    caption_token_total: int = 0
    description_token_total: int = 0
    has_captions: bool = True

    def as_array(self, mode=FeatureMode.COUNTS):
        mode = FeatureMode(mode)
        if mode is FeatureMode.COUNTS:
            return np.array([self.caption_mt_count, self.description_mt_count, self.medical_object_count], float)
        if mode is FeatureMode.COMBINED:
            return np.array([self.caption_mt_count + self.description_mt_count, self.medical_object_count], float)
        return np.array([
            self.caption_mt_count / self.caption_token_total if self.caption_token_total else 0.0,
            self.description_mt_count / self.description_token_total if self.description_token_total else 0.0,
            self.medical_object_count,
        ])


def feature_names(mode=FeatureMode.COUNTS):
    mode = FeatureMode(mode)
    if mode is FeatureMode.COMBINED:
        return ("text_mt", "med_obj")
    if mode is FeatureMode.RATES:
        return ("cap_mt_rate", "desc_mt_rate", "med_obj")
    return FEATURE_NAMES


def _mt_count(tagged, video_id):
    mt = total = 0
    for item in tagged:
        labels = getattr(item, "labels", item)
        vid = getattr(item, "video_id", None)
        if vid is not None and vid != video_id:
            raise ValidationError(f"tagged sentence from {vid} passed for video {video_id}")
        mt += sum(TokenLabel(lab) is TokenLabel.MT for lab in labels)
        total += len(labels)
    return mt, total


def build_features(video, caption_tags=(), description_tags=(), object_summary=None):
    """Count MT-labeled tokens per text source plus medical objects for one video.

    Tag arguments are sequences of tagged sentences (objects with
    ``video_id`` and ``labels``) or bare label sequences.
    """
    vid = video.video_id
    if object_summary is not None and object_summary.video_id != vid:
        raise ValidationError(f"object summary for {object_summary.video_id} passed for video {vid}")
    cap_mt, cap_total = _mt_count(caption_tags, vid)
    desc_mt, desc_total = _mt_count(description_tags, vid)
    return FeatureVector(
        video_id=vid,
        caption_mt_count=cap_mt,
        description_mt_count=desc_mt,
        medical_object_count=object_summary.medical_object_count if object_summary else 0,
        caption_token_total=cap_total,
        description_token_total=desc_total,
        has_captions=bool(getattr(video, "caption_cues", ())),
    )


def _logistic(z):
    # tanh form returns exactly 0.5 at z == 0; clipping keeps the open interval (0, 1)
    p = 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))
    return np.clip(p, _P_MIN, _P_MAX)


_P_MIN, _P_MAX = np.finfo(float).tiny, np.nextafter(1.0, 0.0)


def log_loss_and_grad(w, b, Z, y, l2_lambda=0.0):
    """Mean log loss plus ``l2_lambda/2 * |w|^2`` and its gradient.

    ``y`` holds 1 for HighMK and 0 for LowMK.
    """
    z = Z @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * (w @ w)
    r = _logistic(z) - y
    return float(loss), Z.T @ r / len(y) + l2_lambda * w, float(np.mean(r))


def _encode_y(y):
    out = []
    for lab in y:
        if isinstance(lab, (bool, np.bool_)) or (isinstance(lab, (int, np.integer)) and lab in (0, 1)):
            out.append(int(lab))
            continue
        try:
            out.append(int(KnowledgeLabel(lab) is KnowledgeLabel.HIGH))
        except ValueError:
            raise ValidationError(f"label {lab!r} is not high/low") from None
    return np.array(out, dtype=float)


@dataclass(frozen=True)
class Prediction:
    video_id: str
    probability_high: float
    label: KnowledgeLabel


class LogisticKnowledgeClassifier(ClassifierMixin, BaseEstimator):
    """Binary HighMK/LowMK logistic regression on z-scored features.

    Trained by full-batch gradient descent. The L2 term is applied as an
    exact proximal shrink after each data-gradient step, which keeps the
    update stable for any ``l2_lambda``.

    Parameters
    ----------
    epochs : int, default=1000
        Number of full-batch steps.
    learning_rate : float, default=0.1
    l2_lambda : float, default=1e-3
    threshold : float, default=0.5
        HighMK iff ``P(high) >= threshold``.
    random_state : int, default=0
        Kept for interface symmetry; training is deterministic.
    """

    def __init__(self, epochs=1000, learning_rate=0.1, l2_lambda=1e-3, threshold=0.5, random_state=0):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2_lambda = l2_lambda
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        t = _encode_y(y)
        if len(t) != len(X):
            raise ValidationError(f"{len(t)} labels for {len(X)} rows")
        if t.min() == t.max():
            raise ValidationError("training data contains a single class")
        self.classes_ = np.array([KnowledgeLabel.LOW, KnowledgeLabel.HIGH], dtype=object)
        self.n_features_in_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.active_ = scale > 1e-12 * np.maximum(1.0, np.abs(self.mean_))
        if not self.active_.all():
            warnings.warn(f"dropping constant feature(s) {np.flatnonzero(~self.active_).tolist()}",
                          RuntimeWarning, stacklevel=2)
        self.scale_ = np.where(self.active_, scale, 1.0)
        Z = self._scale(X)

        w = np.zeros(Z.shape[1])
        b = 0.0
        lr, lam = self.learning_rate, self.l2_lambda
        self.loss_history_ = [log_loss_and_grad(w, b, Z, t, lam)[0]]
        for step in range(self.epochs):
            _, gw, gb = log_loss_and_grad(w, b, Z, t, 0.0)
            w = (w - lr * gw) / (1.0 + lr * lam)
            b = b - lr * gb
            loss = log_loss_and_grad(w, b, Z, t, lam)[0]
            if not (np.isfinite(loss) and np.all(np.isfinite(w)) and np.isfinite(b)):
                raise NumericalError(f"logistic regression diverged at step {step}: loss={loss}")
            self.loss_history_.append(loss)
        self.coef_ = np.zeros(X.shape[1])
        self.coef_[self.active_] = w
        self.intercept_ = float(b)
        return self

    @classmethod
    def from_parameters(cls, weights, bias, mean=None, scale=None, threshold=0.5):
        """Build a fitted model from explicit parameters (identity scaling by default)."""
        weights = np.asarray(weights, dtype=float)
        model = cls(threshold=threshold)
        p = len(weights)
        model.coef_ = weights
        model.intercept_ = float(bias)
        model.mean_ = np.zeros(p) if mean is None else np.asarray(mean, dtype=float)
        model.scale_ = np.ones(p) if scale is None else np.asarray(scale, dtype=float)
        model.active_ = np.ones(p, dtype=bool)
        model.n_features_in_ = p
        model.classes_ = np.array([KnowledgeLabel.LOW, KnowledgeLabel.HIGH], dtype=object)
        return model

    def _scale(self, X):
        return ((X - self.mean_) / self.scale_)[:, self.active_]

    def _check_X(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        X = self._check_X(X)
        return self._scale(X) @ self.coef_[self.active_] + self.intercept_

    def predict_proba(self, X):
        p = _logistic(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        p = self.predict_proba(X)[:, 1]
        return np.array([KnowledgeLabel.HIGH if q >= self.threshold else KnowledgeLabel.LOW for q in p],
                        dtype=object)

    def score(self, X, y):
        return float(np.mean(_encode_y(self.predict(X)) == _encode_y(y)))


def train_logistic(features, labels, epochs=1000, learning_rate=0.1, l2_lambda=1e-3, seed=0,
                   mode=FeatureMode.COUNTS):
    X = np.vstack([f.as_array(mode) for f in features])
    return LogisticKnowledgeClassifier(epochs=epochs, learning_rate=learning_rate,
                                       l2_lambda=l2_lambda, random_state=seed).fit(X, labels)


def predict_video(model, features, video_id=None, mode=FeatureMode.COUNTS):
    if isinstance(features, FeatureVector):
        video_id = features.video_id if video_id is None else video_id
        x = features.as_array(mode)
    else:
        x = np.asarray(features, dtype=float)
    if x.ndim != 1:
        raise ValidationError("predict_video takes a single feature vector")
    p = float(model.predict_proba(x[None, :])[0, 1])
    label = KnowledgeLabel.HIGH if p >= model.threshold else KnowledgeLabel.LOW
    return Prediction(video_id, p, label)


def gradient_check_logistic(weights, bias, Z, y, l2_lambda=0.0, eps=1e-6, tolerance=1e-6):
    """Central-difference check of :func:`log_loss_and_grad` on scaled features ``Z``."""
    if eps <= 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    w = np.array(weights, dtype=float)
    Z = np.asarray(Z, dtype=float)
    t = _encode_y(y)
    _, gw, gb = log_loss_and_grad(w, bias, Z, t, l2_lambda)
    worst, worst_at = 0.0, None
    for j in range(len(w) + 1):
        if j < len(w):
            up, down = w.copy(), w.copy()
            up[j] += eps
            down[j] -= eps
            num = (log_loss_and_grad(up, bias, Z, t, l2_lambda)[0]
                   - log_loss_and_grad(down, bias, Z, t, l2_lambda)[0]) / (2 * eps)
            err, at = relative_error(gw[j], num), ("w", j)
        else:
            num = (log_loss_and_grad(w, bias + eps, Z, t, l2_lambda)[0]
                   - log_loss_and_grad(w, bias - eps, Z, t, l2_lambda)[0]) / (2 * eps)
            err, at = relative_error(gb, num), ("b",)
        if worst_at is None or err > worst:
            worst, worst_at = err, at
    return GradientCheckReport(float(worst), worst_at, len(w) + 1, tolerance)


# -- persistence ------------------------------------------------------------

LOGIT_MAGIC = "medlit-logit v1"


def _floats(values):
    return " ".join(repr(float(v)) for v in values)


def serialize_logistic(model, names=FEATURE_NAMES):
    check_is_fitted(model, "coef_")
    names = tuple(names)
    if len(names) != model.n_features_in_:
        raise ValidationError(f"{len(names)} feature names for {model.n_features_in_} features")
    return "\n".join([
        LOGIT_MAGIC,
        "features " + " ".join(names),
        "mean " + _floats(model.mean_),
        "scale " + _floats(model.scale_),
        "active " + " ".join(str(int(a)) for a in model.active_),
        "weights " + _floats(model.coef_),
        "bias " + repr(float(model.intercept_)),
        "threshold " + repr(float(model.threshold)),
    ]) + "\n"


def parse_logistic(raw, path=None):
    """Returns ``(model, feature_names)``."""
    lines = raw.splitlines()
    if not lines or lines[0] != LOGIT_MAGIC:
        raise ParseError("not a medlit-logit v1 file", line=1, path=path)
    fields_ = {}
    for lineno, line in enumerate(lines[1:], 2):
        key, _, rest = line.partition(" ")
        fields_[key] = (rest.split(), lineno)
    try:
        names = tuple(fields_["features"][0])
        floats = {k: np.array([float(v) for v in fields_[k][0]]) for k in ("mean", "scale", "weights")}
        model = LogisticKnowledgeClassifier.from_parameters(
            floats["weights"], float(fields_["bias"][0][0]), floats["mean"], floats["scale"],
            float(fields_["threshold"][0][0]),
        )
        model.active_ = np.array([v == "1" for v in fields_["active"][0]])
    except (KeyError, IndexError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}", path=path) from None
    if not all(len(a) == len(names) for a in (model.mean_, model.scale_, model.active_, model.coef_)):
        raise ParseError("parameter lengths disagree with feature list", path=path)
    return model, names


def save_logistic(model, path, names=FEATURE_NAMES):
    write_text(path, serialize_logistic(model, names))


def load_logistic(path):
    return parse_logistic(read_text(path), path=path)


FEATURE_TABLE_HEADER = ("video_id", "cap_mt", "desc_mt", "med_obj", "label")


def serialize_feature_table(features, labels):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FEATURE_TABLE_HEADER)
    for f, lab in zip(features, labels):
        label = "" if lab is None else KnowledgeLabel(lab).value
        writer.writerow([f.video_id, f.caption_mt_count, f.description_mt_count, f.medical_object_count, label])
    return buf.getvalue()


def parse_feature_table(raw, path=None):
    """Returns ``(features, labels)``; token totals are not stored and come back as 0."""
    rows = list(csv.reader(io.StringIO(raw)))
    if not rows or tuple(rows[0]) != FEATURE_TABLE_HEADER:
        raise ParseError("bad feature table header", line=1, path=path)
    features, labels = [], []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != 5:
            raise ParseError("expected 5 columns", line=lineno, path=path)
        try:
            features.append(FeatureVector(row[0], int(row[1]), int(row[2]), int(row[3])))
            labels.append(KnowledgeLabel(row[4]) if row[4] else None)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
    return features, labels
