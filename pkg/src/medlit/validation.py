"""Input validation helpers shared by the estimators."""

import numpy as np

from .exceptions import ValidationError


def check_token_sequences(X, allow_empty_sequence=False):
    """Validate a list of token sequences and return it as a list of lists."""
    if isinstance(X, (str, bytes)):
        raise ValidationError("expected a list of token sequences, got a string")
    out = []
    for i, seq in enumerate(X):
        if isinstance(seq, str):
            raise ValidationError(f"sequence {i} is a string, expected a list of tokens")
        seq = list(seq)
        if not seq and not allow_empty_sequence:
            raise ValidationError(f"sequence {i} is empty")
        if not all(isinstance(t, str) for t in seq):
            raise ValidationError(f"sequence {i} contains non-string tokens")
        out.append(seq)
    return out


def check_label_sequences(y, X, labels):
    """Validate per-token label sequences aligned with ``X``; coerce to ``labels`` enum."""
    y = list(y)
    if len(y) != len(X):
        raise ValidationError(f"{len(y)} label sequences for {len(X)} token sequences")
    out = []
    for i, (labs, toks) in enumerate(zip(y, X)):
        labs = list(labs)
        if len(labs) != len(toks):
            raise ValidationError(f"sequence {i}: {len(labs)} labels for {len(toks)} tokens")
        try:
            out.append([labels(lab) for lab in labs])
        except ValueError as exc:
            raise ValidationError(f"sequence {i}: {exc}") from None
    return out


def check_embedded(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValidationError(f"embedded sentence: expected shape (n, {dim}), got {x.shape}")
    if x.shape[0] < 1:
        raise ValidationError("embedded sentence: empty")
    return x
