"""Pruned vocabulary and skip-gram word embeddings with negative sampling."""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._io import read_text, write_text
from ._numeric import GradientCheckReport, relative_error
from .exceptions import NumericalError, ParseError, ValidationError
from .validation import check_token_sequences

logger = logging.getLogger(__name__)

UNK = "UNK"


@dataclass
class Vocabulary:
    """Token <-> id mapping keeping the ``max_kept`` most frequent tokens.

    Ids ``0 .. len(kept)-1`` are kept tokens in rank order; the last id is
    ``UNK``.
    """

    id_to_token: list
    frequency: dict = field(default_factory=dict)
    max_kept: int = 5000

    def __post_init__(self):
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if UNK not in self.token_to_id:
            raise ValidationError("vocabulary has no UNK entry")
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValidationError("vocabulary has duplicate tokens")

    @property
    def unk_id(self):
        return self.token_to_id[UNK]

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def digest(self):
        return hashlib.sha256("\n".join(self.id_to_token).encode("utf-8")).hexdigest()[:16]


def _as_token_lists(sentences):
    return [list(getattr(s, "tokens", s)) for s in sentences]


def build_vocabulary(sentences, max_kept=5000):
    """Rank tokens by frequency (ties lexicographic) and keep the top ``max_kept``.

    ``sentences`` may be :class:`~medlit.corpus.Sentence` objects or plain
    token lists.
    """
    if max_kept < 1:
        raise ValidationError(f"max_kept must be >= 1, got {max_kept}")
    counts = Counter(t for toks in _as_token_lists(sentences) for t in toks)
    if not counts:
        raise ValidationError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [t for t, _ in ranked[:max_kept] if t != UNK]
    pruned = sum(n for t, n in ranked[max_kept:])
    freq = {t: counts[t] for t in kept}
    freq[UNK] = pruned + counts.get(UNK, 0)
    return Vocabulary(kept + [UNK], freq, max_kept)


def encode_tokens(vocab, tokens):
    unk = vocab.unk_id
    return [vocab.token_to_id.get(t, unk) for t in tokens]


@dataclass(frozen=True)
class TrainPair:
    center_id: int
    context_id: int


def generate_training_pairs(ids, window):
    """All (center, context) pairs within ``window`` positions, i then j ascending."""
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    n = len(ids)
    return [
        TrainPair(ids[i], ids[j])
        for i in range(n)
        for j in range(max(0, i - window), min(n, i + window + 1))
        if j != i
    ]


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def pair_loss_and_grad(center_vec, context_vec, negative_vecs):
    """Negative-sampling loss for one (center, context) pair and its gradients.

    ``loss = -log s(u.v_o) - sum_k log s(-u.v_k)`` where ``u`` is the center
    input vector and ``v`` are output vectors.

    Returns
    -------
    loss : float
    grad_center : ndarray (D,)
    grad_context : ndarray (D,)
    grad_negatives : ndarray (K, D)
    """
    pos = center_vec @ context_vec
    neg = negative_vecs @ center_vec
    loss = -_log_sigmoid(pos) - np.sum(_log_sigmoid(-neg))
    g_pos = _sigmoid(pos) - 1.0
    g_neg = _sigmoid(neg)
    grad_center = g_pos * context_vec + g_neg @ negative_vecs
    grad_context = g_pos * center_vec
    grad_negatives = np.outer(g_neg, center_vec)
    return float(loss), grad_center, grad_context, grad_negatives


@dataclass
class EmbeddingModel:
    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray | None = None

    @property
    def dim(self):
        return self.input_vectors.shape[1]

    def vector(self, token):
        return self.input_vectors[self.vocab.token_to_id.get(token, self.vocab.unk_id)]

    def embed(self, tokens):
        return self.input_vectors[encode_tokens(self.vocab, tokens)]


def noise_distribution(vocab, power=0.75):
    freq = np.array([vocab.frequency.get(t, 0) for t in vocab.id_to_token], dtype=float)
    weights = freq ** power
    if weights.sum() == 0:
        weights = np.ones_like(weights)
    return weights / weights.sum()


class SkipGramEmbedding(TransformerMixin, BaseEstimator):
    """Skip-gram word2vec trained by per-pair SGD with negative sampling.

    Parameters
    ----------
    dim : int, default=50
    window : int, default=5
    negatives : int, default=5
        Noise samples per positive pair, drawn from unigram^0.75.
    epochs : int, default=5
    learning_rate : float, default=0.025
    max_kept : int, default=5000
        Vocabulary size before UNK.
    random_state : int, default=0

    Attributes
    ----------
    vocab_ : Vocabulary
    input_vectors_ : ndarray of shape (n_vocab, dim)
    output_vectors_ : ndarray of shape (n_vocab, dim)
    loss_history_ : list of float
        Mean pair loss at initialization followed by the mean loss of each epoch.
    """

    def __init__(self, dim=50, window=5, negatives=5, epochs=5, learning_rate=0.025,
                 max_kept=5000, random_state=0):
        self.dim = dim
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.max_kept = max_kept
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_token_sequences(_as_token_lists(X))
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        rng = np.random.default_rng(self.random_state)
        self.vocab_ = build_vocabulary(X, self.max_kept)
        n_vocab, dim = len(self.vocab_), self.dim
        self.input_vectors_ = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_vocab, dim))
        self.output_vectors_ = np.zeros((n_vocab, dim))

        pairs = [p for toks in X for p in generate_training_pairs(encode_tokens(self.vocab_, toks), self.window)]
        if not pairs:
            raise ValidationError("corpus yields no skip-gram training pairs")
        centers = np.array([p.center_id for p in pairs])
        contexts = np.array([p.context_id for p in pairs])
        noise = noise_distribution(self.vocab_)

        self.loss_history_ = []
        W_in, W_out = self.input_vectors_, self.output_vectors_
        for epoch in range(self.epochs):
            order = rng.permutation(len(pairs))
            negs = rng.choice(n_vocab, size=(len(pairs), self.negatives), p=noise)
            if epoch == 0:
                self.loss_history_.append(self._mean_loss(centers, contexts, negs))
            total = 0.0
            for step, k in enumerate(order):
                c, o, ns = centers[k], contexts[k], negs[k]
                loss, g_c, g_o, g_n = pair_loss_and_grad(W_in[c], W_out[o], W_out[ns])
                if not (np.isfinite(loss) and np.all(np.isfinite(g_c))):
                    raise NumericalError(f"non-finite skip-gram update at epoch {epoch}, pair {step}")
                total += loss
                W_in[c] -= self.learning_rate * g_c
                W_out[o] -= self.learning_rate * g_o
                np.subtract.at(W_out, ns, self.learning_rate * g_n)
            self.loss_history_.append(total / len(pairs))
            logger.debug("skip-gram epoch %d mean loss %.5f", epoch, self.loss_history_[-1])
        return self

    def _mean_loss(self, centers, contexts, negs):
        W_in, W_out = self.input_vectors_, self.output_vectors_
        total = 0.0
        for c, o, ns in zip(centers, contexts, negs):
            total += pair_loss_and_grad(W_in[c], W_out[o], W_out[ns])[0]
        return total / len(centers)

    def transform(self, X):
        """Map each token sequence to an (n_tokens, dim) array."""
        check_is_fitted(self, "input_vectors_")
        return [self.input_vectors_[encode_tokens(self.vocab_, toks)] for toks in _as_token_lists(X)]

    def to_model(self):
        check_is_fitted(self, "input_vectors_")
        return EmbeddingModel(self.vocab_, self.input_vectors_, self.output_vectors_)


def train_embeddings(sentences, dim=50, window=5, negatives=5, epochs=5, learning_rate=0.025,
                     max_kept=5000, seed=0):
    est = SkipGramEmbedding(dim=dim, window=window, negatives=negatives, epochs=epochs,
                            learning_rate=learning_rate, max_kept=max_kept, random_state=seed)
    return est.fit(sentences).to_model()


def nearest_neighbors(model, token, k=5):
    """Top-``k`` tokens by cosine similarity to ``token``.

    Returns
    -------
    neighbors : list of (str, float)
        Sorted by similarity descending, ties by token.
    is_unknown : bool
        True when ``token`` was out of vocabulary and UNK was queried instead.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    vocab = model.vocab
    is_unknown = token not in vocab
    qid = vocab.token_to_id.get(token, vocab.unk_id)
    vecs = model.input_vectors
    norms = np.linalg.norm(vecs, axis=1)
    q = vecs[qid]
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = (vecs @ q) / (norms * norms[qid])
    sims = np.clip(np.nan_to_num(sims, nan=0.0), -1.0, 1.0)
    ranked = sorted(
        ((vocab.id_to_token[i], float(sims[i])) for i in range(len(vocab)) if i != qid),
        key=lambda ts: (-ts[1], ts[0]),
    )
    return ranked[:k], is_unknown


# -- persistence ------------------------------------------------------------

EMB_MAGIC = "medlit-emb v1"


def serialize_embeddings(model):
    n, d = model.input_vectors.shape
    lines = [f"{EMB_MAGIC} {n} {d}"]
    for tok, row in zip(model.vocab.id_to_token, model.input_vectors):
        lines.append(" ".join([tok] + [repr(float(x)) for x in row]))
    return "\n".join(lines) + "\n"


def parse_embeddings(raw, path=None):
    lines = raw.splitlines()
    if not lines:
        raise ParseError("empty embedding file", path=path)
    head = lines[0].split()
    if len(head) != 4 or " ".join(head[:2]) != EMB_MAGIC:
        raise ParseError(f"bad header {lines[0]!r}", line=1, path=path)
    n, d = int(head[2]), int(head[3])
    if len(lines) - 1 != n:
        raise ParseError(f"header declares {n} tokens, found {len(lines) - 1}", path=path)
    tokens, rows = [], np.empty((n, d))
    for i, line in enumerate(lines[1:]):
        parts = line.split(" ")
        if len(parts) != d + 1:
            raise ParseError(f"expected {d} values", line=i + 2, path=path)
        tokens.append(parts[0])
        try:
            rows[i] = [float(x) for x in parts[1:]]
        except ValueError:
            raise ParseError("non-numeric value", line=i + 2, path=path) from None
    if not np.all(np.isfinite(rows)):
        raise ParseError("non-finite embedding value", path=path)
    return EmbeddingModel(Vocabulary(tokens), rows)


def save_embeddings(model, path):
    write_text(path, serialize_embeddings(model))


def load_embeddings(path):
    return parse_embeddings(read_text(path), path=path)


def skipgram_gradient_check(input_vectors, output_vectors, center, context, negatives, eps=1e-5,
                            tolerance=1e-4):
    """Central-difference check of :func:`pair_loss_and_grad` over every entry of both matrices."""
    if eps <= 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    W_in = np.array(input_vectors, dtype=float)
    W_out = np.array(output_vectors, dtype=float)
    negatives = np.asarray(negatives)

    def loss_and_full_grads():
        loss, g_c, g_o, g_n = pair_loss_and_grad(W_in[center], W_out[context], W_out[negatives])
        G_in = np.zeros_like(W_in)
        G_out = np.zeros_like(W_out)
        G_in[center] += g_c
        G_out[context] += g_o
        np.add.at(G_out, negatives, g_n)
        return loss, G_in, G_out

    _, G_in, G_out = loss_and_full_grads()
    worst, worst_at, n = 0.0, None, 0
    for name, W, G in (("input", W_in, G_in), ("output", W_out, G_out)):
        for idx in np.ndindex(W.shape):
            orig = W[idx]
            W[idx] = orig + eps
            up = loss_and_full_grads()[0]
            W[idx] = orig - eps
            down = loss_and_full_grads()[0]
            W[idx] = orig
            err = relative_error(G[idx], (up - down) / (2 * eps))
            n += 1
            if worst_at is None or err > worst:
                worst, worst_at = err, (name, idx)
    return GradientCheckReport(float(worst), worst_at, n, tolerance)
