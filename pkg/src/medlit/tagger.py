"""Bidirectional LSTM + softmax token tagger for medical terms.

Gate blocks inside every stacked weight matrix are ordered
``(input, forget, output, candidate)``; each block has ``hidden_size``
rows.
"""

import logging
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._io import read_text
from ._numeric import GradientCheckReport, relative_error
from .corpus import Sentence, Source, TokenLabel
from .embeddings import Vocabulary, build_vocabulary, encode_tokens
from .exceptions import NumericalError, ParseError, ValidationError
from .text import tokenize
from .validation import check_embedded, check_label_sequences, check_token_sequences

logger = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "candidate")
DIRECTIONS = ("forward", "backward")
LABELS = (TokenLabel.NA, TokenLabel.MT)
PROB_FLOOR = 1e-12


@dataclass
class TaggerParams:
    W_fwd: np.ndarray  # (4H, D)
    U_fwd: np.ndarray  # (4H, H)
    b_fwd: np.ndarray  # (4H,)
    W_bwd: np.ndarray
    U_bwd: np.ndarray
    b_bwd: np.ndarray
    W_out: np.ndarray  # (2, 2H)
    b_out: np.ndarray  # (2,)

    @property
    def input_dim(self):
        return self.W_fwd.shape[1]

    @property
    def hidden_size(self):
        return self.U_fwd.shape[1]

    def tensors(self):
        """Name -> array in declaration order."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def direction(self, name):
        suffix = {"forward": "fwd", "backward": "bwd"}[name]
        return getattr(self, f"W_{suffix}"), getattr(self, f"U_{suffix}"), getattr(self, f"b_{suffix}")

    def gate(self, direction, kind, gate):
        """View of one gate block, e.g. ``gate("forward", "W", "forget")`` -> (H, D)."""
        W, U, b = self.direction(direction)
        H = self.hidden_size
        g = GATES.index(gate)
        return {"W": W, "U": U, "b": b}[kind][g * H:(g + 1) * H]

    def copy(self):
        return TaggerParams(**{k: v.copy() for k, v in self.tensors().items()})

    def zeros_like(self):
        return TaggerParams(**{k: np.zeros_like(v) for k, v in self.tensors().items()})

    def check_shapes(self):
        D, H = self.input_dim, self.hidden_size
        expected = {
            "W_fwd": (4 * H, D), "U_fwd": (4 * H, H), "b_fwd": (4 * H,),
            "W_bwd": (4 * H, D), "U_bwd": (4 * H, H), "b_bwd": (4 * H,),
            "W_out": (2, 2 * H), "b_out": (2,),
        }
        for name, arr in self.tensors().items():
            if arr.shape != expected[name]:
                raise ValidationError(f"tensor {name}: expected shape {expected[name]}, got {arr.shape}")


def init_params(seed=0, D=50, H=150):
    """Glorot-uniform weights, forget-gate bias 1, other biases 0."""
    if D < 1 or H < 1:
        raise ValidationError("D and H must be >= 1")
    rng = np.random.default_rng(seed)

    def glorot(rows, cols, fan_in, fan_out):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(rows, cols))

    def bias():
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        return b

    arrays = {}
    for suffix in ("fwd", "bwd"):
        arrays[f"W_{suffix}"] = glorot(4 * H, D, D, H)
        arrays[f"U_{suffix}"] = glorot(4 * H, H, H, H)
        arrays[f"b_{suffix}"] = bias()
    arrays["W_out"] = glorot(2, 2 * H, 2 * H, 2)
    arrays["b_out"] = np.zeros(2)
    return TaggerParams(**arrays)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def lstm_forward(W, U, b, x):
    """Run one LSTM chain left to right over ``x`` (n, D) from zero state.

    Returns the per-step cache: dict of (n, H) arrays ``i f o g c tc h``.
    """
    n, H = x.shape[0], U.shape[1]
    Wx = x @ W.T + b
    cache = {k: np.empty((n, H)) for k in ("i", "f", "o", "g", "c", "tc", "h")}
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(n):
        z = Wx[t] + U @ h
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        o = _sigmoid(z[2 * H:3 * H])
        g = np.tanh(z[3 * H:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        for k, v in (("i", i), ("f", f), ("o", o), ("g", g), ("c", c), ("tc", tc), ("h", h)):
            cache[k][t] = v
    return cache


def lstm_backward(W, U, x, cache, dh_ext):
    """Backpropagate ``dh_ext`` (n, H) through one chain; returns (dW, dU, db, dx)."""
    n, H = x.shape[0], U.shape[1]
    i, f, o, g, c, tc, h = (cache[k] for k in ("i", "f", "o", "g", "c", "tc", "h"))
    c_prev = np.vstack([np.zeros((1, H)), c[:-1]])
    h_prev = np.vstack([np.zeros((1, H)), h[:-1]])
    dZ = np.empty((n, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(n - 1, -1, -1):
        dh = dh_ext[t] + dh_next
        dc = dh * o[t] * (1.0 - tc[t] ** 2) + dc_next
        dZ[t, :H] = dc * g[t] * i[t] * (1.0 - i[t])
        dZ[t, H:2 * H] = dc * c_prev[t] * f[t] * (1.0 - f[t])
        dZ[t, 2 * H:3 * H] = dh * tc[t] * o[t] * (1.0 - o[t])
        dZ[t, 3 * H:] = dc * i[t] * (1.0 - g[t] ** 2)
        dc_next = dc * f[t]
        dh_next = U.T @ dZ[t]
    return dZ.T @ x, dZ.T @ h_prev, dZ.sum(axis=0), dZ @ W


@dataclass
class ForwardCache:
    x: np.ndarray
    fwd: dict
    bwd: dict  # computed on reversed input, stored in processing order
    states: np.ndarray  # (n, 2H) [h_fwd_t ; h_bwd_t] by position
    probs: np.ndarray  # (n, 2)

    @property
    def h_forward(self):
        return self.fwd["h"]

    @property
    def h_backward(self):
        return self.bwd["h"][::-1]


def blstm_forward(params, x):
    """Tag distribution for an embedded sentence ``x`` (n, D).

    Returns
    -------
    probs : ndarray (n, 2)
        Columns are P(NA), P(MT).
    cache : ForwardCache
    """
    params.check_shapes()
    x = check_embedded(x, params.input_dim)
    fwd = lstm_forward(params.W_fwd, params.U_fwd, params.b_fwd, x)
    bwd = lstm_forward(params.W_bwd, params.U_bwd, params.b_bwd, x[::-1])
    states = np.hstack([fwd["h"], bwd["h"][::-1]])
    probs = softmax(states @ params.W_out.T + params.b_out)
    return probs, ForwardCache(x, fwd, bwd, states, probs)


def _label_indices(gold):
    return np.array([LABELS.index(TokenLabel(g)) for g in gold], dtype=int)


def sentence_loss(probs, gold_labels):
    """Mean per-token negative log probability of the gold label."""
    gold = _label_indices(gold_labels)
    if len(gold) != len(probs):
        raise ValidationError(f"{len(gold)} gold labels for {len(probs)} tokens")
    p = probs[np.arange(len(gold)), gold]
    if np.any(p < PROB_FLOOR):
        warnings.warn("zero probability at gold label; clamped", RuntimeWarning, stacklevel=2)
    return float(-np.mean(np.log(np.maximum(p, PROB_FLOOR))))


def param_gradients(params, x, gold_labels, cache=None):
    """Loss and full BPTT gradients for one sentence.

    Returns
    -------
    loss : float
    grads : TaggerParams
        Same shapes as ``params``.
    dx : ndarray (n, D)
        Gradient with respect to the input embeddings.
    """
    if cache is None:
        _, cache = blstm_forward(params, x)
    x = cache.x
    n, H = x.shape[0], params.hidden_size
    gold = _label_indices(gold_labels)
    if len(gold) != n:
        raise ValidationError(f"{len(gold)} gold labels for {n} tokens")
    loss = sentence_loss(cache.probs, gold_labels)

    dlogits = cache.probs.copy()
    dlogits[np.arange(n), gold] -= 1.0
    dlogits /= n
    dstates = dlogits @ params.W_out
    dW_f, dU_f, db_f, dx_f = lstm_backward(params.W_fwd, params.U_fwd, x, cache.fwd, dstates[:, :H])
    dW_b, dU_b, db_b, dx_b = lstm_backward(params.W_bwd, params.U_bwd, x[::-1], cache.bwd, dstates[::-1, H:])
    grads = TaggerParams(
        W_fwd=dW_f, U_fwd=dU_f, b_fwd=db_f,
        W_bwd=dW_b, U_bwd=dU_b, b_bwd=db_b,
        W_out=dlogits.T @ cache.states, b_out=dlogits.sum(axis=0),
    )
    dx = dx_f + dx_b[::-1]
    for name, g in list(grads.tensors().items()) + [("embeddings", dx)]:
        bad = ~np.isfinite(g)
        if bad.any():
            raise NumericalError(f"non-finite gradient in {name} at index {tuple(np.argwhere(bad)[0])}")
    return loss, grads, dx


def gradient_check(params, x, gold_labels, eps=1e-5, tolerance=1e-4, max_coords=10000, seed=0):
    """Compare analytic BPTT gradients with central differences.

    Every parameter and input coordinate is checked unless there are more
    than ``max_coords``, in which case a seeded random subsample is used.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    params = params.copy()
    x = np.array(x, dtype=float)
    _, grads, dx = param_gradients(params, x, gold_labels)
    targets = [(name, arr, getattr(grads, name)) for name, arr in params.tensors().items()]
    targets.append(("x", x, dx))
    coords = [(k, idx) for k, (_, arr, _) in enumerate(targets) for idx in np.ndindex(arr.shape)]
    if len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        coords = [coords[i] for i in sorted(rng.choice(len(coords), max_coords, replace=False))]

    def loss():
        probs, _ = blstm_forward(params, x)
        return sentence_loss(probs, gold_labels)

    worst, worst_at = 0.0, None
    for k, idx in coords:
        name, arr, grad = targets[k]
        orig = arr[idx]
        arr[idx] = orig + eps
        up = loss()
        arr[idx] = orig - eps
        down = loss()
        arr[idx] = orig
        err = relative_error(grad[idx], (up - down) / (2 * eps))
        if worst_at is None or err > worst:
            worst, worst_at = err, (name, idx)
    return GradientCheckReport(float(worst), worst_at, len(coords), tolerance)


def _global_norm(arrays):
    return float(np.sqrt(sum(np.sum(a * a) for a in arrays)))


def tag_sentence(params, embeddings, vocab, tokens):
    """Argmax labels for ``tokens``; exact ties go to NA.

    ``embeddings`` is the (|V|, D) matrix aligned with ``vocab``.
    """
    if not tokens:
        raise ValidationError("cannot tag an empty sentence")
    probs, _ = blstm_forward(params, embeddings[encode_tokens(vocab, tokens)])
    return labels_from_probs(probs)


def labels_from_probs(probs):
    return [TokenLabel.MT if p[1] > p[0] else TokenLabel.NA for p in probs]


class BLSTMTagger(BaseEstimator):
    """Sequence labeler over word embeddings: BLSTM layer, then per-token softmax.

    Parameters
    ----------
    hidden_size : int, default=150
        Units per direction; the softmax sees ``2 * hidden_size`` features.
    embeddings : EmbeddingModel, optional
        Pre-trained embeddings. Without them the vocabulary is built from the
        training tokens and vectors start standard normal. The skip-gram
        init range is too narrow for the recurrent layer to pick up token
        identity quickly.
    embedding_dim : int, default=50
        Only used when ``embeddings`` is None.
    epochs : int, default=10
    learning_rate : float, default=0.05
    clip_norm : float, default=5.0
        Global gradient norm limit per sentence update.
    freeze_embeddings : bool, default=False
    max_kept : int, default=5000
    random_state : int, default=0

    Attributes
    ----------
    params_ : TaggerParams
    vocab_ : Vocabulary
    embeddings_ : ndarray of shape (n_vocab, D)
        Possibly fine-tuned copy of the input embeddings.
    log_ : list of dict
        ``epoch``, ``mean_loss``, ``token_accuracy``; epoch 0 is before training.
    """

    def __init__(self, hidden_size=150, embeddings=None, embedding_dim=50, epochs=10,
                 learning_rate=0.05, clip_norm=5.0, freeze_embeddings=False, max_kept=5000,
                 random_state=0):
        self.hidden_size = hidden_size
        self.embeddings = embeddings
        self.embedding_dim = embedding_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.clip_norm = clip_norm
        self.freeze_embeddings = freeze_embeddings
        self.max_kept = max_kept
        self.random_state = random_state

    def fit(self, X, y):
        X = check_token_sequences(X)
        y = check_label_sequences(y, X, TokenLabel)
        if not X:
            raise ValidationError("no annotated sentences to train on")
        rng = np.random.default_rng(self.random_state)
        if self.embeddings is not None:
            self.vocab_ = self.embeddings.vocab
            self.embeddings_ = np.array(self.embeddings.input_vectors, dtype=float)
        else:
            self.vocab_ = build_vocabulary(X, self.max_kept)
            D = self.embedding_dim
            self.embeddings_ = rng.standard_normal((len(self.vocab_), D))
        D = self.embeddings_.shape[1]
        self.params_ = init_params(int(rng.integers(2**31)), D, self.hidden_size)
        encoded = [np.array(encode_tokens(self.vocab_, toks)) for toks in X]

        self.log_ = [self._evaluate(encoded, y, epoch=0)]
        for epoch in range(1, self.epochs + 1):
            for k in rng.permutation(len(X)):
                self._step(encoded[k], y[k], epoch)
            self.log_.append(self._evaluate(encoded, y, epoch))
            logger.debug("tagger epoch %d loss %.5f acc %.4f", epoch,
                         self.log_[-1]["mean_loss"], self.log_[-1]["token_accuracy"])
        return self

    def _step(self, ids, gold, epoch):
        p = self.params_
        loss, grads, dx = param_gradients(p, self.embeddings_[ids], gold)
        if not np.isfinite(loss):
            raise NumericalError(f"tagger loss diverged at epoch {epoch}")
        arrays = list(grads.tensors().values())
        if not self.freeze_embeddings:
            arrays.append(dx)
        norm = _global_norm(arrays)
        scale = self.learning_rate
        if self.clip_norm and norm > self.clip_norm:
            scale *= self.clip_norm / norm
        for name, g in grads.tensors().items():
            getattr(p, name)[...] -= scale * g
        if not self.freeze_embeddings:
            np.subtract.at(self.embeddings_, ids, scale * dx)

    def _evaluate(self, encoded, y, epoch):
        total_loss, correct, n_tok = 0.0, 0, 0
        for ids, gold in zip(encoded, y):
            probs, _ = blstm_forward(self.params_, self.embeddings_[ids])
            total_loss += sentence_loss(probs, gold)
            correct += sum(a is b for a, b in zip(labels_from_probs(probs), gold))
            n_tok += len(gold)
        mean_loss = total_loss / len(encoded)
        if not np.isfinite(mean_loss):
            raise NumericalError(f"tagger loss diverged at epoch {epoch}")
        return {"epoch": epoch, "mean_loss": mean_loss, "token_accuracy": correct / n_tok}

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_token_sequences(X)
        return [blstm_forward(self.params_, self.embeddings_[encode_tokens(self.vocab_, t)])[0] for t in X]

    def predict(self, X):
        return [labels_from_probs(p) for p in self.predict_proba(X)]

    def save(self, path):
        save_tagger(self, path)


# -- spans and baseline -----------------------------------------------------

@dataclass(frozen=True)
class MedicalSpan:
    start_token: int
    end_token: int  # inclusive
    text: str
    sentence: object = None


def extract_spans(tokens, labels, sentence=None):
    """Maximal runs of MT labels."""
    if len(tokens) != len(labels):
        raise ValidationError(f"{len(labels)} labels for {len(tokens)} tokens")
    spans, start = [], None
    for i, lab in enumerate(list(labels) + [TokenLabel.NA]):
        is_mt = TokenLabel(lab) is TokenLabel.MT
        if is_mt and start is None:
            start = i
        elif not is_mt and start is not None:
            spans.append(MedicalSpan(start, i - 1, " ".join(tokens[start:i]), sentence))
            start = None
    return spans


def lexicon_baseline_tag(lexicon, tokens):
    """Greedy left-to-right longest-match gazetteer tagging.

    ``lexicon`` entries are token tuples (strings are split on whitespace).
    """
    entries = {tuple(e.split()) if isinstance(e, str) else tuple(e) for e in lexicon}
    entries.discard(())
    longest = max((len(e) for e in entries), default=0)
    labels = [TokenLabel.NA] * len(tokens)
    i = 0
    while i < len(tokens):
        for size in range(min(longest, len(tokens) - i), 0, -1):
            if tuple(tokens[i:i + size]) in entries:
                labels[i:i + size] = [TokenLabel.MT] * size
                i += size
                break
        else:
            i += 1
    return labels


class LexiconTagger(BaseEstimator):
    """Gazetteer baseline with the same ``predict`` surface as :class:`BLSTMTagger`."""

    def __init__(self, lexicon=()):
        self.lexicon = lexicon

    def fit(self, X=None, y=None):
        self.lexicon_ = frozenset(tuple(e.split()) if isinstance(e, str) else tuple(e) for e in self.lexicon)
        return self

    def predict(self, X):
        check_is_fitted(self, "lexicon_")
        return [lexicon_baseline_tag(self.lexicon_, list(t)) for t in check_token_sequences(X)]


def load_term_lexicon(path):
    terms = set()
    for line in read_text(path).splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            terms.add(tuple(tokenize(line)))
    return frozenset(terms)


# -- persistence ------------------------------------------------------------

TAGGER_MAGIC = b"medlit-tagger v1\n"


def save_tagger(tagger, path):
    """Binary container: magic, header ``D H vocab_digest n_vocab``, vocab lines, tensors.

    Each tensor is introduced by a line ``name ndim dim...`` followed by
    its float64 little-endian bytes.
    """
    check_is_fitted(tagger, "params_")
    p, vocab = tagger.params_, tagger.vocab_
    out = [TAGGER_MAGIC,
           f"{p.input_dim} {p.hidden_size} {vocab.digest()} {len(vocab)}\n".encode()]
    out += [(tok + "\n").encode("utf-8") for tok in vocab.id_to_token]
    tensors = dict(p.tensors(), embeddings=tagger.embeddings_)
    for name, arr in tensors.items():
        out.append(f"{name} {arr.ndim} {' '.join(map(str, arr.shape))}\n".encode())
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(out))


def load_tagger(path):
    data = Path(path).read_bytes()
    if not data.startswith(TAGGER_MAGIC):
        raise ParseError("not a medlit tagger file", path=path)
    pos = len(TAGGER_MAGIC)

    def line():
        nonlocal pos
        end = data.index(b"\n", pos)
        text = data[pos:end].decode("utf-8")
        pos = end + 1
        return text

    try:
        D, H, digest, n_vocab = line().split()
        D, H, n_vocab = int(D), int(H), int(n_vocab)
        vocab = Vocabulary([line() for _ in range(n_vocab)])
        if vocab.digest() != digest:
            raise ParseError("vocabulary hash mismatch", path=path)
        arrays = {}
        for _ in range(len(fields(TaggerParams)) + 1):
            name, ndim, *shape = line().split()
            shape = tuple(int(s) for s in shape)
            if len(shape) != int(ndim):
                raise ParseError(f"tensor {name}: bad shape line", path=path)
            nbytes = 8 * int(np.prod(shape))
            arrays[name] = np.frombuffer(data[pos:pos + nbytes], dtype="<f8").reshape(shape).astype(float)
            pos += nbytes
    except ValueError as exc:
        raise ParseError(f"corrupt tagger file: {exc}", path=path) from None
    tagger = BLSTMTagger(hidden_size=H, embedding_dim=D)
    tagger.embeddings_ = arrays.pop("embeddings")
    tagger.params_ = TaggerParams(**arrays)
    tagger.params_.check_shapes()
    tagger.vocab_ = vocab
    return tagger


@dataclass(frozen=True)
class TaggedSentence:
    """A corpus sentence with predicted labels."""

    sentence: object
    labels: tuple

    @property
    def video_id(self):
        return self.sentence.video_id

    @property
    def tokens(self):
        return self.sentence.tokens


def tag_corpus_sentences(tagger, sentences):
    preds = tagger.predict([s.tokens for s in sentences])
    return [TaggedSentence(s, tuple(p)) for s, p in zip(sentences, preds)]


TAGGED_HEADER = "video_id\tsource\tsentence_index\ttoken_index\ttoken\tlabel\tpredicted"


def serialize_tagged(tagged):
    """Annotation-format rows with a ``predicted`` column; ``_`` marks a missing gold label."""
    lines = [TAGGED_HEADER]
    for k, ts in enumerate(tagged):
        s = ts.sentence
        if k:
            lines.append("")
        gold = s.gold_labels or ("_",) * len(s.tokens)
        for i, (tok, g, p) in enumerate(zip(s.tokens, gold, ts.labels)):
            g = getattr(g, "value", g)
            lines.append(f"{s.video_id}\t{s.source.value}\t{s.index}\t{i}\t{tok}\t{g}\t{TokenLabel(p).value}")
    return "".join(line + "\n" for line in lines)


def parse_tagged(raw, path=None):
    groups = {}
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip() or (lineno == 1 and line == TAGGED_HEADER):
            continue
        cols = line.split("\t")
        if len(cols) != 7:
            raise ParseError(f"expected 7 columns, got {len(cols)}", line=lineno, path=path)
        try:
            key = (cols[0], Source(cols[1]), int(cols[2]))
            gold = None if cols[5] == "_" else TokenLabel(cols[5])
            groups.setdefault(key, []).append((int(cols[3]), cols[4], gold, TokenLabel(cols[6])))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
    out = []
    for (vid, src, idx), rows in groups.items():
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ParseError(f"token indices of {vid}/{src.value}/{idx} are not contiguous", path=path)
        golds = [r[2] for r in rows]
        gold = None if all(g is None for g in golds) else tuple(golds)
        if gold is not None and None in gold:
            raise ParseError(f"partially labeled sentence {vid}/{src.value}/{idx}", path=path)
        sent = Sentence(vid, src, idx, tuple(r[1] for r in rows), gold)
        out.append(TaggedSentence(sent, tuple(r[3] for r in rows)))
    return out
